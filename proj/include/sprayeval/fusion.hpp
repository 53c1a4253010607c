#pragma once

#include <string>
#include <string_view>

#include "sprayeval/tensor.hpp"

namespace sprayeval {

/// OUT: main head only. AUX: auxiliary head only. ADD / MULTI: element-wise
/// sum / product of the class score maps after aligning aux to main.
enum class FusionMode { out, aux, add, multi };

/// Space the combination happens in. In prob space both heads are softmaxed
/// first and the fused result is returned as log-probabilities, so a later
/// softmax yields the renormalized fused distribution.
enum class FusionSpace { logit, prob };

struct FusionConfig {
    FusionMode mode = FusionMode::out;
    FusionSpace space = FusionSpace::logit;
};

FusionMode parse_fusion_mode(std::string_view s);
FusionSpace parse_fusion_space(std::string_view s);
std::string to_string(FusionMode m);
std::string to_string(FusionSpace s);

/// Throws ContractError when main and aux disagree on the class count.
Tensor fuse(const Tensor& main, const Tensor& aux, FusionMode mode, FusionSpace space = FusionSpace::logit);

inline Tensor fuse(const Tensor& main, const Tensor& aux, const FusionConfig& cfg) {
    return fuse(main, aux, cfg.mode, cfg.space);
}

}  // namespace sprayeval
