#include "cardiospike/model/config.hpp"

#include <stdexcept>

#include "json.hpp"

namespace cardiospike::model {

std::size_t dilation_for_layer(std::size_t layer, std::size_t kernel_size) {
    if (layer < 1 || kernel_size < 2) {
        throw std::invalid_argument("dilation_for_layer: need layer >= 1 and kernel_size >= 2");
    }
    std::size_t d = 1;
    for (std::size_t i = 1; i < layer; ++i) {
        d *= kernel_size;
    }
    return d;
}

std::size_t receptive_field(std::size_t kernel_size, std::size_t layers) {
    if (kernel_size < 2 || layers < 1) {
        throw std::invalid_argument("receptive_field: need kernel_size >= 2 and layers >= 1");
    }
    std::size_t span = 0;
    std::size_t power = 1;
    for (std::size_t i = 1; i <= layers; ++i) {
        span += power;
        power *= kernel_size;
    }
    return (kernel_size - 1) * span + 1;
}

void DetectorConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("DetectorConfig: " + what); };
    if (kernel_size < 3 || kernel_size % 2 == 0) {
        fail("kernel_size must be odd and >= 3");
    }
    if (channels == 0 || hidden == 0 || side == 0 || layers == 0 || filters == 0 || classes == 0) {
        fail("channels, hidden, side, layers, filters and classes must be positive");
    }
    if (se_reduction == 0) {
        fail("se_reduction must be positive");
    }
    if (length <= 2 * pad) {
        fail("target length T - 2P must be positive (T=" + std::to_string(length) +
             ", P=" + std::to_string(pad) + ")");
    }
    // The deepest layer's tap spacing has to fit inside one segment.
    if (dilation_for_layer(layers, kernel_size) > length) {
        fail("deepest dilation " + std::to_string(dilation_for_layer(layers, kernel_size)) +
             " exceeds segment length " + std::to_string(length));
    }
}

std::string DetectorConfig::describe() const {
    return "k=" + std::to_string(kernel_size) + " C=" + std::to_string(channels) + " H=" + std::to_string(hidden) +
           " S=" + std::to_string(side) + " L=" + std::to_string(layers) + " F=" + std::to_string(filters) +
           " T=" + std::to_string(length) + " P=" + std::to_string(pad) + " M=" + std::to_string(classes) +
           " se_reduction=" + std::to_string(se_reduction) +
           " padding=" + (padding == tensor::Padding::replicate ? "replicate" : "zero");
}

std::string detector_config_to_json(const DetectorConfig& c) {
    nlohmann::ordered_json j;
    j["kernel_size"] = c.kernel_size;
    j["channels"] = c.channels;
    j["hidden"] = c.hidden;
    j["side"] = c.side;
    j["layers"] = c.layers;
    j["filters"] = c.filters;
    j["length"] = c.length;
    j["pad"] = c.pad;
    j["classes"] = c.classes;
    j["se_reduction"] = c.se_reduction;
    j["padding"] = c.padding == tensor::Padding::replicate ? "replicate" : "zero";
    return j.dump(2);
}

DetectorConfig detector_config_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) {
        throw std::invalid_argument("DetectorConfig: expected a JSON object");
    }
    DetectorConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "kernel_size") {
            c.kernel_size = value.get<std::size_t>();
        } else if (key == "channels") {
            c.channels = value.get<std::size_t>();
        } else if (key == "hidden") {
            c.hidden = value.get<std::size_t>();
        } else if (key == "side") {
            c.side = value.get<std::size_t>();
        } else if (key == "layers") {
            c.layers = value.get<std::size_t>();
        } else if (key == "filters") {
            c.filters = value.get<std::size_t>();
        } else if (key == "length") {
            c.length = value.get<std::size_t>();
        } else if (key == "pad") {
            c.pad = value.get<std::size_t>();
        } else if (key == "classes") {
            c.classes = value.get<std::size_t>();
        } else if (key == "se_reduction") {
            c.se_reduction = value.get<std::size_t>();
        } else if (key == "padding") {
            const auto p = value.get<std::string>();
            if (p != "replicate" && p != "zero") {
                throw std::invalid_argument("DetectorConfig: padding must be 'replicate' or 'zero'");
            }
            c.padding = p == "zero" ? tensor::Padding::zero : tensor::Padding::replicate;
        } else {
            throw std::invalid_argument("DetectorConfig: unknown key '" + key + "'");
        }
    }
    return c;
}

}  // namespace cardiospike::model
