// SPDX-License-Identifier: Apache-2.0

#include "neutex/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace neutex {

namespace {
constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

std::vector<double> gaussian_window() {
    std::vector<double> w(kWindow * kWindow);
    double total = 0.0;
    const int half = kWindow / 2;
    for (int y = 0; y < kWindow; ++y) {
        for (int x = 0; x < kWindow; ++x) {
            const double dx = x - half, dy = y - half;
            const double g = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
            w[static_cast<size_t>(y) * kWindow + static_cast<size_t>(x)] = g;
            total += g;
        }
    }
    for (double& g : w) g /= total;
    return w;
}

std::vector<double> to_luma(const Image& img) {
    std::vector<double> luma(static_cast<size_t>(img.width) * static_cast<size_t>(img.height));
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double v;
            if (img.channels >= 3) {
                v = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
            } else {
                v = img.at(x, y, 0);
            }
            luma[static_cast<size_t>(y) * static_cast<size_t>(img.width) +
                 static_cast<size_t>(x)] = v;
        }
    }
    return luma;
}

void check_shapes(const Image& a, const Image& b, const char* what) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
        throw std::runtime_error(std::string(what) + ": image shape mismatch");
    }
}
}  // namespace

double psnr(const Image& a, const Image& b) {
    check_shapes(a, b, "psnr");
    const double err = mse(a, b);
    if (err == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / err);
}

double ssim(const Image& a, const Image& b, const Image* mask) {
    check_shapes(a, b, "ssim");
    if (a.width < kWindow || a.height < kWindow) {
        throw std::runtime_error("ssim: image smaller than the 11x11 window");
    }
    if (mask && (mask->width != a.width || mask->height != a.height)) {
        throw std::runtime_error("ssim: mask shape mismatch");
    }
    const std::vector<double> win = gaussian_window();
    const std::vector<double> la = to_luma(a);
    const std::vector<double> lb = to_luma(b);
    const double c1 = kK1 * kK1;
    const double c2 = kK2 * kK2;
    const int half = kWindow / 2;
    double total = 0.0;
    long count = 0;
    auto at = [&](const std::vector<double>& l, int x, int y) {
        return l[static_cast<size_t>(y) * static_cast<size_t>(a.width) + static_cast<size_t>(x)];
    };
    for (int cy = half; cy < a.height - half; ++cy) {
        for (int cx = half; cx < a.width - half; ++cx) {
            if (mask) {
                bool inside = true;
                for (int dy = -half; inside && dy <= half; ++dy) {
                    for (int dx = -half; dx <= half; ++dx) {
                        if (mask->at(cx + dx, cy + dy, 0) <= 0.5) {
                            inside = false;
                            break;
                        }
                    }
                }
                if (!inside) continue;
            }
            double mu_a = 0, mu_b = 0;
            for (int dy = -half; dy <= half; ++dy) {
                for (int dx = -half; dx <= half; ++dx) {
                    const double w =
                        win[static_cast<size_t>(dy + half) * kWindow + static_cast<size_t>(dx + half)];
                    mu_a += w * at(la, cx + dx, cy + dy);
                    mu_b += w * at(lb, cx + dx, cy + dy);
                }
            }
            double var_a = 0, var_b = 0, cov = 0;
            for (int dy = -half; dy <= half; ++dy) {
                for (int dx = -half; dx <= half; ++dx) {
                    const double w =
                        win[static_cast<size_t>(dy + half) * kWindow + static_cast<size_t>(dx + half)];
                    const double da = at(la, cx + dx, cy + dy) - mu_a;
                    const double db = at(lb, cx + dx, cy + dy) - mu_b;
                    var_a += w * da * da;
                    var_b += w * db * db;
                    cov += w * da * db;
                }
            }
            const double num = (2 * mu_a * mu_b + c1) * (2 * cov + c2);
            const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
            total += num / den;
            ++count;
        }
    }
    if (count == 0) throw std::runtime_error("ssim: no valid windows (mask too small)");
    return total / static_cast<double>(count);
}

EvalReport EvalReport::build(std::vector<View> views, bool masked) {
    EvalReport report;
    report.views = std::move(views);
    report.masked = masked;
    if (!report.views.empty()) {
        for (const View& v : report.views) {
            report.mean_psnr += v.psnr;
            report.mean_ssim += v.ssim;
        }
        report.mean_psnr /= static_cast<double>(report.views.size());
        report.mean_ssim /= static_cast<double>(report.views.size());
    }
    return report;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["masked"] = masked;
    j["mean_psnr"] = std::isinf(mean_psnr) ? nlohmann::json("inf") : nlohmann::json(mean_psnr);
    j["mean_ssim"] = mean_ssim;
    j["views"] = nlohmann::json::array();
    for (const View& v : views) {
        nlohmann::json e;
        e["id"] = v.id;
        e["psnr"] = std::isinf(v.psnr) ? nlohmann::json("inf") : nlohmann::json(v.psnr);
        e["ssim"] = v.ssim;
        j["views"].push_back(e);
    }
    return j.dump(2);
}

std::string EvalReport::to_csv() const {
    std::ostringstream os;
    os.precision(10);
    os << "view,psnr,ssim\n";
    for (const View& v : views) os << v.id << ',' << v.psnr << ',' << v.ssim << '\n';
    os << "mean," << mean_psnr << ',' << mean_ssim << '\n';
    return os.str();
}

}  // namespace neutex
