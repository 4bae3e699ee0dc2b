#include "disen/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace disen {

namespace {

using nlohmann::json;

// Pulls `key` out of `section` if present, erasing it so that leftover keys
// can be reported as unknown afterwards.
template <typename T>
void take(json& section, const char* key, T& out) {
    const auto it = section.find(key);
    if (it == section.end()) return;
    out = it->template get<T>();
    section.erase(it);
}

void reject_leftovers(const json& section, const std::string& name) {
    if (section.empty()) return;
    throw std::invalid_argument("config: unknown key " + name + "." + section.begin().key());
}

json take_section(json& doc, const char* name) {
    const auto it = doc.find(name);
    if (it == doc.end()) return json::object();
    if (!it->is_object())
        throw std::invalid_argument(std::string("config: section ") + name +
                                    " must be an object");
    json section = *it;
    doc.erase(it);
    return section;
}

}  // namespace

const char* variant_name(ContrastiveVariant v) {
    switch (v) {
        case ContrastiveVariant::COD: return "cod";
        case ContrastiveVariant::CD: return "cd";
        case ContrastiveVariant::None: return "none";
    }
    throw std::invalid_argument("variant_name: bad variant");
}

ContrastiveVariant variant_from_name(const std::string& name) {
    if (name == "cod") return ContrastiveVariant::COD;
    if (name == "cd") return ContrastiveVariant::CD;
    if (name == "none") return ContrastiveVariant::None;
    throw std::invalid_argument("config: unknown variant '" + name +
                                "' (expected cod, cd, or none)");
}

ModelConfig GlobalConfig::model_config() const {
    ModelConfig m = model;
    m.resolution = resolution;
    return m;
}

TrainConfig GlobalConfig::train_config() const {
    TrainConfig t = train;
    t.timesteps = timesteps;
    t.seed = seed;
    return t;
}

SamplerConfig GlobalConfig::sampler_config() const {
    SamplerConfig s = sampler;
    s.seed = seed;
    return s;
}

void GlobalConfig::validate() const {
    if (version != 1)
        throw std::invalid_argument("config: unsupported version " + std::to_string(version));
    if (pairs_per_kind <= 0) throw std::invalid_argument("config: data.pairs_per_kind must be positive");
    model_config().validate();
    train_config().validate();
    sampler.validate(timesteps);
}

std::string GlobalConfig::dump() const {
    const json doc = {
        {"version", version},
        {"seed", seed},
        {"data", {{"resolution", resolution}, {"pairs_per_kind", pairs_per_kind}}},
        {"model",
         {{"patch_size", model.patch_size},
          {"d_img", model.d_img},
          {"d_txt", model.d_txt},
          {"d_attn", model.d_attn},
          {"d_u", model.d_u},
          {"n_q", model.n_q},
          {"extractor_layers", model.extractor_layers},
          {"ffn_mult", model.ffn_mult},
          {"trunk_channels", model.trunk_channels},
          {"gn_groups", model.gn_groups},
          {"time_dim", model.time_dim},
          {"time_hidden", model.time_hidden}}},
        {"diffusion", {{"timesteps", timesteps}}},
        {"sampler",
         {{"ddim_steps", sampler.ddim_steps}, {"omega", sampler.omega}, {"mu", sampler.mu}}},
        {"train",
         {{"warmup_steps", train.warmup_steps},
          {"main_steps", train.main_steps},
          {"batch_size", train.batch_size},
          {"lr_a", train.lr_a},
          {"lr_b", train.lr_b},
          {"lambda", train.lambda},
          {"variant", variant_name(train.variant)},
          {"mu_train", train.mu_train},
          {"cond_dropout", train.cond_dropout},
          {"dataset_dir", train.dataset_dir},
          {"checkpoint_interval", train.checkpoint_interval}}},
    };
    return doc.dump(2);  // nlohmann objects iterate sorted -> canonical
}

GlobalConfig parse_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw std::invalid_argument("config: top level must be an object");

    GlobalConfig out;
    take(doc, "version", out.version);
    take(doc, "seed", out.seed);

    json data = take_section(doc, "data");
    take(data, "resolution", out.resolution);
    take(data, "pairs_per_kind", out.pairs_per_kind);
    reject_leftovers(data, "data");

    json model = take_section(doc, "model");
    take(model, "patch_size", out.model.patch_size);
    take(model, "d_img", out.model.d_img);
    take(model, "d_txt", out.model.d_txt);
    take(model, "d_attn", out.model.d_attn);
    take(model, "d_u", out.model.d_u);
    take(model, "n_q", out.model.n_q);
    take(model, "extractor_layers", out.model.extractor_layers);
    take(model, "ffn_mult", out.model.ffn_mult);
    take(model, "trunk_channels", out.model.trunk_channels);
    take(model, "gn_groups", out.model.gn_groups);
    take(model, "time_dim", out.model.time_dim);
    take(model, "time_hidden", out.model.time_hidden);
    reject_leftovers(model, "model");

    json diffusion = take_section(doc, "diffusion");
    take(diffusion, "timesteps", out.timesteps);
    reject_leftovers(diffusion, "diffusion");

    json sampler = take_section(doc, "sampler");
    take(sampler, "ddim_steps", out.sampler.ddim_steps);
    take(sampler, "omega", out.sampler.omega);
    take(sampler, "mu", out.sampler.mu);
    reject_leftovers(sampler, "sampler");

    json train = take_section(doc, "train");
    take(train, "warmup_steps", out.train.warmup_steps);
    take(train, "main_steps", out.train.main_steps);
    take(train, "batch_size", out.train.batch_size);
    take(train, "lr_a", out.train.lr_a);
    take(train, "lr_b", out.train.lr_b);
    take(train, "lambda", out.train.lambda);
    std::string variant = variant_name(out.train.variant);
    take(train, "variant", variant);
    out.train.variant = variant_from_name(variant);
    take(train, "mu_train", out.train.mu_train);
    take(train, "cond_dropout", out.train.cond_dropout);
    take(train, "dataset_dir", out.train.dataset_dir);
    take(train, "checkpoint_interval", out.train.checkpoint_interval);
    reject_leftovers(train, "train");

    reject_leftovers(doc, "top-level");
    return out;
}

GlobalConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::uint64_t config_hash(const GlobalConfig& cfg) {
    const std::string text = cfg.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (const char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace disen
