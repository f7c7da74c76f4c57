#pragma once

#include <string>
#include <vector>

#include "eca/emulator.hpp"
#include "eca/json_text.hpp"

namespace eca {

/// Weight-interchange document. Any third-party fully connected MLP can be
/// represented by transcribing its matrices into this schema:
///   { "input_dim": n, "output_dim": m,
///     "layers": [ { "weights": [[out x in]], "bias": [out],
///                   "activation": "relu"|"tanh"|"logistic"|"identity" }, ... ] }
inline std::string emulator_to_json(const MlpEmulator& e) {
    jsontext::Writer w;
    w.begin_object();
    w.key("input_dim").value(e.input_dim());
    w.key("output_dim").value(e.output_dim());
    w.key("layers").begin_array();
    for (const DenseLayer& l : e.layers()) {
        w.begin_object();
        w.key("weights").value(l.weights);
        w.key("bias").value(l.bias);
        w.key("activation").value(activation_name(l.activation));
        w.end_object();
    }
    w.end_array();
    w.end_object();
    return w.str();
}

inline MlpEmulator emulator_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw FormatError("emulator document: expected object");
    for (const char* field : {"input_dim", "output_dim", "layers"})
        if (!j.contains(field))
            throw FormatError(std::string("emulator document: missing field '") + field + "'");
    if (!j["input_dim"].is_number_unsigned() || !j["output_dim"].is_number_unsigned())
        throw FormatError("emulator document: dims must be non-negative integers");
    if (!j["layers"].is_array() || j["layers"].empty())
        throw FormatError("emulator document: 'layers' must be a non-empty array");

    std::vector<DenseLayer> layers;
    for (const auto& lj : j["layers"]) {
        if (!lj.is_object() || !lj.contains("weights") || !lj.contains("bias") ||
            !lj.contains("activation"))
            throw FormatError("emulator document: layer needs weights, bias, activation");
        if (!lj["activation"].is_string())
            throw FormatError("emulator document: activation must be a string");
        DenseLayer l;
        l.weights = jsontext::as_matrix(lj["weights"], "layer weights");
        l.bias = jsontext::as_vector(lj["bias"], "layer bias");
        l.activation = activation_from_name(lj["activation"].get<std::string>());
        layers.push_back(std::move(l));
    }

    MlpEmulator e(std::move(layers));  // validates the dimension chain
    const auto in = j["input_dim"].get<std::size_t>();
    const auto out = j["output_dim"].get<std::size_t>();
    if (e.input_dim() != in)
        throw DimensionError("emulator document: input_dim " + std::to_string(in) +
                             " does not match first layer (" +
                             std::to_string(e.input_dim()) + ")");
    if (e.output_dim() != out)
        throw DimensionError("emulator document: output_dim " + std::to_string(out) +
                             " does not match last layer (" +
                             std::to_string(e.output_dim()) + ")");
    return e;
}

inline MlpEmulator load_emulator(const std::string& path) {
    return emulator_from_json(jsontext::parse_file(path));
}

inline void save_emulator(const std::string& path, const MlpEmulator& e) {
    jsontext::write_file(path, emulator_to_json(e));
}

}  // namespace eca
