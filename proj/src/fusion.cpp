#include "sprayeval/fusion.hpp"

#include <limits>

namespace sprayeval {

FusionMode parse_fusion_mode(std::string_view s) {
    if (s == "out") return FusionMode::out;
    if (s == "aux") return FusionMode::aux;
    if (s == "add") return FusionMode::add;
    if (s == "multi") return FusionMode::multi;
    throw ConfigError("unknown fusion mode '" + std::string(s) + "'");
}

FusionSpace parse_fusion_space(std::string_view s) {
    if (s == "logit") return FusionSpace::logit;
    if (s == "prob") return FusionSpace::prob;
    throw ConfigError("unknown fusion space '" + std::string(s) + "'");
}

std::string to_string(FusionMode m) {
    switch (m) {
        case FusionMode::out: return "out";
        case FusionMode::aux: return "aux";
        case FusionMode::add: return "add";
        case FusionMode::multi: return "multi";
    }
    return "?";
}

std::string to_string(FusionSpace s) { return s == FusionSpace::logit ? "logit" : "prob"; }

Tensor fuse(const Tensor& main, const Tensor& aux, FusionMode mode, FusionSpace space) {
    if (main.channels() != aux.channels()) {
        throw ContractError("fusion: main has " + std::to_string(main.channels()) + " classes, aux has " +
                            std::to_string(aux.channels()));
    }
    Tensor a = bilinear_resize(aux, main.height(), main.width());
    Tensor m = main;
    if (space == FusionSpace::prob) {
        m = softmax_channels(m);
        a = softmax_channels(a);
    }

    Tensor out = m;
    switch (mode) {
        case FusionMode::out: break;
        case FusionMode::aux: out = std::move(a); break;
        case FusionMode::add: out.data() += a.data(); break;
        case FusionMode::multi: out.data() *= a.data(); break;
    }

    if (space == FusionSpace::prob) {
        out.data() = out.data().max(1e-30f).log();
    }
    // keep the finite-values invariant under extreme logits
    out.data() = out.data().min(std::numeric_limits<float>::max()).max(std::numeric_limits<float>::lowest());
    return out;
}

}  // namespace sprayeval
