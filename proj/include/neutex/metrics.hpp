// SPDX-License-Identifier: Apache-2.0
//
// Image-quality metrics for held-out view evaluation.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "neutex/image.hpp"

namespace neutex {

// 10*log10(1/MSE) over all channels; +inf for identical images.
double psnr(const Image& a, const Image& b);

// SSIM on luma (0.299/0.587/0.114) with an 11x11 Gaussian window (sigma 1.5),
// K1=0.01, K2=0.03, dynamic range 1, mean over valid (fully interior)
// windows. With a mask, only windows fully inside the foreground count.
double ssim(const Image& a, const Image& b, const Image* mask = nullptr);

struct EvalReport {
    struct View {
        std::string id;
        double psnr = 0.0;
        double ssim = 0.0;
    };
    std::vector<View> views;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    bool masked = false;

    static EvalReport build(std::vector<View> views, bool masked);
    std::string to_json() const;
    std::string to_csv() const;
};

}  // namespace neutex
