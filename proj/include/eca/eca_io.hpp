#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "eca/eca.hpp"
#include "eca/emulator_io.hpp"
#include "eca/json_text.hpp"

namespace eca {

/// Model document: basis vectors, cumulative covered variances, the master
/// seed of the last fit, and a path reference to the emulator file.
inline std::string model_to_json(const EcaModel& model,
                                 const std::string& emulator_ref) {
    jsontext::Writer w;
    w.begin_object();
    w.key("input_dim").value(model.input_dim());
    w.key("emulator").value(emulator_ref);
    w.key("seed");
    if (model.seed())
        w.value(*model.seed());
    else
        w.null();
    w.key("V").begin_array();
    for (const Vector& v : model.components()) w.value(v);
    w.end_array();
    w.key("y_var").value(model.y_var());
    w.key("x_var").value(model.x_var());
    w.end_object();
    return w.str();
}

inline void save_model(const std::string& path, const EcaModel& model,
                       const std::string& emulator_ref) {
    jsontext::write_file(path, model_to_json(model, emulator_ref));
}

/// Loads a model document; the emulator reference is resolved relative to
/// the model file's directory.
inline EcaModel load_model(const std::string& path) {
    const nlohmann::json j = jsontext::parse_file(path);
    if (!j.is_object()) throw FormatError("model document: expected object");
    for (const char* field : {"input_dim", "emulator", "V", "y_var", "x_var"})
        if (!j.contains(field))
            throw FormatError(std::string("model document: missing field '") + field + "'");
    if (!j["emulator"].is_string())
        throw FormatError("model document: 'emulator' must be a path string");

    const auto dir = std::filesystem::path(path).parent_path();
    std::filesystem::path emu_path = j["emulator"].get<std::string>();
    if (emu_path.is_relative()) emu_path = dir / emu_path;
    auto emulator = std::make_shared<const MlpEmulator>(load_emulator(emu_path.string()));

    std::vector<Vector> v;
    if (!j["V"].is_array()) throw FormatError("model document: 'V' must be an array");
    for (const auto& vj : j["V"]) v.push_back(jsontext::as_vector(vj, "model component"));

    std::optional<std::uint64_t> seed;
    if (j.contains("seed") && !j["seed"].is_null()) seed = j["seed"].get<std::uint64_t>();

    EcaModel model(std::move(emulator), std::move(v),
                   jsontext::as_vector(j["y_var"], "y_var"),
                   jsontext::as_vector(j["x_var"], "x_var"), seed);
    if (model.input_dim() != j["input_dim"].get<std::size_t>())
        throw DimensionError("model document: input_dim does not match emulator");
    return model;
}

}  // namespace eca
