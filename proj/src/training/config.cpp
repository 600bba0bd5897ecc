#include "cardiospike/training/config.hpp"

#include <stdexcept>

#include "json.hpp"

namespace cardiospike::training {

void TrainConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("TrainConfig: " + what); };
    if (!(focal_alpha > 0.0 && focal_alpha <= 1.0)) {
        fail("focal_alpha must lie in (0, 1]");
    }
    if (!(focal_gamma >= 0.0)) {
        fail("focal_gamma must be >= 0");
    }
    if (!(learning_rate > 0.0)) {
        fail("learning_rate must be > 0");
    }
    if (!(weight_decay >= 0.0)) {
        fail("weight_decay must be >= 0");
    }
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
        fail("beta1 and beta2 must lie in (0, 1)");
    }
    if (!(epsilon > 0.0)) {
        fail("epsilon must be > 0");
    }
    if (batch_size == 0) {
        fail("batch_size must be positive");
    }
    if (!(threshold > 0.0 && threshold < 1.0)) {
        fail("threshold must lie in (0, 1)");
    }
    if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
        fail("holdout_fraction must lie in [0, 1)");
    }
}

std::string train_config_to_json(const TrainConfig& c) {
    nlohmann::ordered_json j;
    j["focal_alpha"] = c.focal_alpha;
    j["focal_gamma"] = c.focal_gamma;
    j["learning_rate"] = c.learning_rate;
    j["weight_decay"] = c.weight_decay;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["epsilon"] = c.epsilon;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["seed"] = c.seed;
    j["threshold"] = c.threshold;
    j["holdout_fraction"] = c.holdout_fraction;
    j["jobs"] = c.jobs;
    return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) {
        throw std::invalid_argument("TrainConfig: expected a JSON object");
    }
    const auto known = nlohmann::json::parse(train_config_to_json(TrainConfig{}));
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) {
            throw std::invalid_argument("TrainConfig: unknown key '" + key + "'");
        }
    }
    TrainConfig c;
    c.focal_alpha = j.value("focal_alpha", c.focal_alpha);
    c.focal_gamma = j.value("focal_gamma", c.focal_gamma);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.threshold = j.value("threshold", c.threshold);
    c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
    c.jobs = j.value("jobs", c.jobs);
    return c;
}

}  // namespace cardiospike::training
