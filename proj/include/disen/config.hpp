#pragma once

// Merged run configuration: one JSON document with data/model/diffusion/
// sampler/train sections, strict unknown-key rejection, and a canonical dump
// whose reparse is identity. The FNV-1a hash of the canonical dump ties
// checkpoints to the configuration that produced them.

#include <cstdint>
#include <string>

#include "disen/diffusion.hpp"
#include "disen/model.hpp"
#include "disen/trainloop.hpp"

namespace disen {

struct GlobalConfig {
    int version = 1;
    std::uint64_t seed = 0;

    // data
    int resolution = 32;
    int pairs_per_kind = 1500;

    // model (resolution lives in the data section)
    ModelConfig model;

    // diffusion
    int timesteps = 1000;

    // sampler
    SamplerConfig sampler;

    // train (timesteps/seed live in their own sections)
    TrainConfig train;

    // Sections resolved into the module structs they configure.
    ModelConfig model_config() const;
    TrainConfig train_config() const;
    SamplerConfig sampler_config() const;

    void validate() const;
    std::string dump() const;  // canonical: sorted keys, 2-space indent
};

// Parses a JSON document; missing keys keep defaults, unknown keys are
// rejected naming section and key.
GlobalConfig parse_config(const std::string& json_text);
GlobalConfig load_config(const std::string& path);

const char* variant_name(ContrastiveVariant v);
ContrastiveVariant variant_from_name(const std::string& name);

// FNV-1a over the canonical dump.
std::uint64_t config_hash(const GlobalConfig& cfg);

}  // namespace disen
