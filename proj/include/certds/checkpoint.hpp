#pragma once

// A trained model on disk: one JSON file per network in a directory, plus the
// training config and, when known, the dataset normalization.

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "certds/certificates.hpp"
#include "certds/config.hpp"
#include "certds/dataset.hpp"
#include "certds/net.hpp"
#include "certds/training.hpp"

namespace certds {

struct ModelFiles {
    Mlp f;
    LyapunovCandidate v;
    Mlp b;
    std::optional<NormalizationTransform> transform;
};

inline nlohmann::json to_json(const LyapunovCandidate& v) {
    nlohmann::json j = to_json(v.net);
    j["shaping"] = {{"enabled", v.shaped}, {"weight", v.shaping_weight}};
    return j;
}

inline LyapunovCandidate lyapunov_from_json(const nlohmann::json& j) {
    LyapunovCandidate v{mlp_from_json(j)};
    if (j.contains("shaping")) {
        try {
            v.shaped = j.at("shaping").at("enabled").get<bool>();
            v.shaping_weight = j.at("shaping").at("weight").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("lyapunov checkpoint: ") + e.what());
        }
    }
    if (v.net.role() != NetRole::Lyapunov) throw ParseError("lyapunov checkpoint: role must be lyapunov");
    return v;
}

inline void save_model(const std::filesystem::path& dir, const ModelFiles& m) {
    std::filesystem::create_directories(dir);
    save_json_file((dir / "dynamics.json").string(), to_json(m.f, m.transform));
    save_json_file((dir / "lyapunov.json").string(), to_json(m.v));
    save_json_file((dir / "barrier.json").string(), to_json(m.b, m.transform));
}

inline ModelFiles load_model(const std::filesystem::path& dir) {
    ModelFiles m;
    const nlohmann::json jf = load_json_file((dir / "dynamics.json").string());
    m.f = mlp_from_json(jf);
    if (m.f.role() != NetRole::Dynamics) throw ParseError("dynamics checkpoint: role must be dynamics");
    if (jf.contains("normalization")) m.transform = transform_from_json(jf.at("normalization"));
    m.v = lyapunov_from_json(load_json_file((dir / "lyapunov.json").string()));
    m.b = mlp_from_json(load_json_file((dir / "barrier.json").string()));
    if (m.b.role() != NetRole::Barrier) throw ParseError("barrier checkpoint: role must be barrier");
    if (m.f.input_dim() != m.v.net.input_dim() || m.f.input_dim() != m.b.input_dim())
        throw ParseError("checkpoint networks disagree on the state dimension");
    return m;
}

/// Training config stored next to the networks, or defaults when absent.
inline TrainConfig load_model_config(const std::filesystem::path& dir) {
    const auto p = dir / "config.json";
    if (!std::filesystem::exists(p)) return {};
    return config_from_json(load_json_file(p.string()));
}

}  // namespace certds
