#include "shotinf/checkpoint.hpp"

#include "shotinf/errors.hpp"

#include <map>

namespace shotinf::model {

using nlohmann::json;

namespace {

std::optional<double> opt(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<double>();
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

} // namespace

json config_to_json(const ModelConfig& c) {
    return json{
        {"d_loc", c.d_loc},
        {"d_type", c.d_type},
        {"d_cnn", c.d_cnn},
        {"d_gru", c.d_gru},
        {"kernel_size", c.kernel_size},
        {"d_rally", c.d_rally},
        {"lambda", c.lambda},
        {"use_two_cnns", c.use_two_cnns},
        {"use_cnn", c.use_cnn},
        {"use_bigru", c.use_bigru},
        {"use_temporal_score", c.use_temporal_score},
        {"use_attention", c.use_attention},
        {"use_rally_input", c.use_rally_input},
        {"literal_eq6_normalization", c.literal_eq6_normalization},
    };
}

ModelConfig config_from_json(const json& j, ModelConfig c) {
    if (!j.is_object()) throw InvalidConfig("model config must be a JSON object");
    const std::map<std::string, std::size_t*> sizes = {
        {"d_loc", &c.d_loc}, {"d_type", &c.d_type}, {"d_cnn", &c.d_cnn},
        {"d_gru", &c.d_gru}, {"kernel_size", &c.kernel_size}, {"d_rally", &c.d_rally},
    };
    const std::map<std::string, bool*> flags = {
        {"use_two_cnns", &c.use_two_cnns},
        {"use_cnn", &c.use_cnn},
        {"use_bigru", &c.use_bigru},
        {"use_temporal_score", &c.use_temporal_score},
        {"use_attention", &c.use_attention},
        {"use_rally_input", &c.use_rally_input},
        {"literal_eq6_normalization", &c.literal_eq6_normalization},
    };
    for (const auto& [key, value] : j.items()) {
        if (auto it = sizes.find(key); it != sizes.end()) {
            if (!value.is_number_unsigned()) throw InvalidConfig("config key '" + key + "' must be a positive integer");
            *it->second = value.get<std::size_t>();
        } else if (auto ft = flags.find(key); ft != flags.end()) {
            if (!value.is_boolean()) throw InvalidConfig("config key '" + key + "' must be a boolean");
            *ft->second = value.get<bool>();
        } else if (key == "lambda") {
            if (!value.is_number()) throw InvalidConfig("config key 'lambda' must be a number");
            c.lambda = value.get<double>();
        } else {
            throw InvalidConfig("unknown model config key '" + key + "'");
        }
    }
    c.validate();
    return c;
}

std::string save_checkpoint(const Checkpoint& ck) {
    json params = json::object();
    json m1 = json::object();
    json m2 = json::object();
    const auto named = ck.params.named();
    const bool with_adam = ck.adam.first_moment.size() == named.size();
    for (std::size_t i = 0; i < named.size(); ++i) {
        const auto& np = named[i];
        params[np.name] = json{{"shape", np.tensor.shape()},
                               {"values", std::vector<double>(np.tensor.values().begin(), np.tensor.values().end())}};
        if (with_adam) {
            m1[np.name] = ck.adam.first_moment[i];
            m2[np.name] = ck.adam.second_moment[i];
        }
    }
    json doc;
    doc["format_version"] = kCheckpointFormatVersion;
    doc["config"] = config_to_json(ck.config);
    doc["params"] = std::move(params);
    doc["adam"] = json{
        {"step", ck.adam.step},
        {"lr", ck.adam.hyper.lr},
        {"beta1", ck.adam.hyper.beta1},
        {"beta2", ck.adam.hyper.beta2},
        {"eps", ck.adam.hyper.eps},
        {"first_moment", std::move(m1)},
        {"second_moment", std::move(m2)},
    };
    const auto& m = ck.meta;
    doc["metadata"] = json{
        {"best_epoch", m.best_epoch},
        {"epochs_run", m.epochs_run},
        {"best_val_auc", opt_json(m.best_val_auc)},
        {"test_auc", opt_json(m.test_auc)},
        {"test_brier", opt_json(m.test_brier)},
        {"seed", m.seed},
        {"target", std::string(blsr::to_string(m.target))},
        {"split", json{{"train", m.train_matches}, {"val", m.val_matches}, {"test", m.test_matches}}},
    };
    return doc.dump(1) + "\n";
}

Checkpoint load_checkpoint(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidConfig(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    try {
        if (doc.value("format_version", -1) != kCheckpointFormatVersion)
            throw InvalidConfig("unsupported checkpoint format_version");
        Checkpoint ck;
        ck.config = config_from_json(doc.at("config"));
        ck.params = zero_params(ck.config);
        const json& params = doc.at("params");
        const auto named = ck.params.named();
        if (params.size() != named.size())
            throw InvalidConfig("checkpoint has " + std::to_string(params.size()) + " tensors, config needs " +
                                std::to_string(named.size()));
        const json& adam = doc.at("adam");
        ck.adam.step = adam.at("step").get<long long>();
        ck.adam.hyper.lr = adam.at("lr").get<double>();
        ck.adam.hyper.beta1 = adam.at("beta1").get<double>();
        ck.adam.hyper.beta2 = adam.at("beta2").get<double>();
        ck.adam.hyper.eps = adam.at("eps").get<double>();
        const json& m1 = adam.at("first_moment");
        const json& m2 = adam.at("second_moment");
        for (const auto& np : named) {
            auto it = params.find(np.name);
            if (it == params.end()) throw InvalidConfig("checkpoint lacks tensor '" + np.name + "'");
            if (it->at("shape").get<ad::Shape>() != np.tensor.shape())
                throw InvalidConfig("tensor '" + np.name + "' has the wrong shape");
            const auto values = it->at("values").get<std::vector<double>>();
            if (values.size() != np.tensor.size()) throw InvalidConfig("tensor '" + np.name + "' has the wrong size");
            ad::Tensor t = np.tensor;
            std::copy(values.begin(), values.end(), t.values().begin());
            if (!m1.empty()) {
                ck.adam.first_moment.push_back(m1.at(np.name).get<std::vector<double>>());
                ck.adam.second_moment.push_back(m2.at(np.name).get<std::vector<double>>());
                if (ck.adam.first_moment.back().size() != t.size() || ck.adam.second_moment.back().size() != t.size())
                    throw InvalidConfig("Adam moments for '" + np.name + "' have the wrong size");
            }
        }
        const json& meta = doc.at("metadata");
        ck.meta.best_epoch = meta.at("best_epoch").get<int>();
        ck.meta.epochs_run = meta.at("epochs_run").get<int>();
        ck.meta.best_val_auc = opt(meta, "best_val_auc");
        ck.meta.test_auc = opt(meta, "test_auc");
        ck.meta.test_brier = opt(meta, "test_brier");
        ck.meta.seed = meta.at("seed").get<std::uint64_t>();
        const auto target = blsr::parse_player(meta.at("target").get<std::string>());
        if (!target) throw InvalidConfig("checkpoint target must be A or B");
        ck.meta.target = *target;
        const json& split = meta.at("split");
        ck.meta.train_matches = split.at("train").get<std::vector<std::string>>();
        ck.meta.val_matches = split.at("val").get<std::vector<std::string>>();
        ck.meta.test_matches = split.at("test").get<std::vector<std::string>>();
        return ck;
    } catch (const json::exception& e) {
        throw InvalidConfig(std::string("malformed checkpoint: ") + e.what());
    }
}

} // namespace shotinf::model
