#pragma once

#include <cstdint>

#include "rulkit/cmapss_io.hpp"

namespace rulkit {

// Configuration for desk-scale synthetic run-to-failure corpora. Generated
// files are indistinguishable from real C-MAPSS input as far as the rest of
// the stack is concerned.
struct SynthConfig {
    int n_engines = 20;
    int min_life = 120;  // cycles
    int max_life = 220;
    int n_constant_sensors = 7;  // in [0, 21]; the constant ones are s1..s<n>
    double noise_std = 0.01;
    double degradation_exponent = 1.5;  // health h(t) = 1 - (t/L)^p
    std::uint64_t seed = 42;
};

struct SynthResult {
    std::vector<EngineTrajectory> train;  // run to failure
    std::vector<EngineTrajectory> test;   // truncated at 30-90% of life
    RulTruthTable truth;                  // terminal RUL of each test engine
};

// Deterministic for a fixed config. Non-constant sensor i emits
// a_i + b_i * h(t) + N(0, noise_std) with per-sensor coefficients drawn once
// from the seeded RNG and |b_i| in [0.5, 2]; constant sensors emit a fixed
// value. Settings emit fixed values plus noise scaled by 1e-3 * noise_std,
// so a noise-free config produces exactly constant settings.
SynthResult generate(const SynthConfig& config);

}  // namespace rulkit
