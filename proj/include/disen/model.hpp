#pragma once

#include <stdexcept>
#include <vector>

namespace disen {

// Architecture hyperparameters shared by the encoders, extractor, and
// denoiser. Defaults are the desk-scale configuration; unit tests shrink
// everything via this struct.
struct ModelConfig {
    int resolution = 32;
    int patch_size = 8;
    int d_img = 64;   // image token width (f_I)
    int d_txt = 64;   // text/query token width (f_cg, c_t, q, e_i)
    int d_attn = 64;  // attention key/query width everywhere
    int d_u = 64;     // concept token width fed to the adapters
    int n_q = 8;      // query tokens per block
    int extractor_layers = 2;
    int ffn_mult = 2;
    std::vector<int> trunk_channels = {16, 32, 48};  // 3 resolution levels
    int gn_groups = 8;
    int time_dim = 32;    // sinusoidal timestep feature width
    int time_hidden = 64; // timestep MLP width
    int n_blocks = 4;     // adapter-bearing attention blocks (fixed by trunk)

    int patches_per_side() const { return resolution / patch_size; }
    int num_patches() const { return patches_per_side() * patches_per_side(); }

    void validate() const {
        if (resolution % patch_size != 0)
            throw std::invalid_argument("config: resolution must be divisible by patch_size");
        if (d_txt != d_attn && d_txt <= 0)
            throw std::invalid_argument("config: bad d_txt");
        if (trunk_channels.size() != 3)
            throw std::invalid_argument("config: trunk_channels must list 3 levels");
        for (int c : trunk_channels)
            if (c % gn_groups != 0)
                throw std::invalid_argument("config: trunk channels must divide into gn_groups");
        if (resolution % 4 != 0)
            throw std::invalid_argument("config: resolution must be divisible by 4 (two downsamples)");
        if (n_blocks != 4)
            throw std::invalid_argument("config: the trunk defines exactly 4 adapter blocks");
        if (n_q <= 0 || extractor_layers <= 0)
            throw std::invalid_argument("config: n_q and extractor_layers must be positive");
    }
};

}  // namespace disen
