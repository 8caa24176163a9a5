#include "rulkit/synth_gen.hpp"

#include <cmath>
#include <random>

namespace rulkit {
namespace {

void validate(const SynthConfig& c) {
    if (c.n_engines <= 0) throw_validation("synth: n_engines must be positive");
    if (c.min_life <= 0 || c.max_life <= 0) throw_validation("synth: lifetimes must be positive");
    if (c.min_life > c.max_life) throw_validation("synth: min_life > max_life");
    if (c.n_constant_sensors < 0 || c.n_constant_sensors > kNumSensors)
        throw_validation("synth: n_constant_sensors must be in [0, 21]");
    if (c.noise_std < 0) throw_validation("synth: noise_std must be non-negative");
    if (!(c.degradation_exponent > 0)) throw_validation("synth: degradation_exponent must be > 0");
}

struct SensorModel {
    std::array<double, kNumSensors> offset;
    std::array<double, kNumSensors> slope;  // 0 for constant sensors
};

EngineTrajectory make_engine(int unit_id, int life, int keep_cycles, const SynthConfig& cfg,
                             const SensorModel& model, std::mt19937_64& rng) {
    std::normal_distribution<double> sensor_noise(0.0, cfg.noise_std);
    std::normal_distribution<double> setting_noise(0.0, 1e-3 * cfg.noise_std);
    const std::array<double, kNumSettings> setting_base = {0.0, 0.0, 100.0};

    EngineTrajectory traj;
    traj.unit_id = unit_id;
    traj.cycles.reserve(keep_cycles);
    for (int t = 1; t <= keep_cycles; ++t) {
        double health = 1.0 - std::pow(static_cast<double>(t) / life, cfg.degradation_exponent);
        CycleRecord rec;
        rec.cycle = t;
        for (int i = 0; i < kNumSettings; ++i)
            rec.settings[i] = setting_base[i] + (cfg.noise_std > 0 ? setting_noise(rng) : 0.0);
        for (int i = 0; i < kNumSensors; ++i) {
            double v = model.offset[i] + model.slope[i] * health;
            if (cfg.noise_std > 0 && model.slope[i] != 0.0) v += sensor_noise(rng);
            rec.sensors[i] = v;
        }
        traj.cycles.push_back(rec);
    }
    return traj;
}

}  // namespace

SynthResult generate(const SynthConfig& config) {
    validate(config);
    std::mt19937_64 rng(config.seed);

    // Per-sensor affine coefficients, shared between train and test so both
    // splits obey the same degradation physics.
    SensorModel model;
    std::uniform_real_distribution<double> offset_dist(100.0, 600.0);
    std::uniform_real_distribution<double> slope_mag(0.5, 2.0);
    std::bernoulli_distribution negate(0.5);
    for (int i = 0; i < kNumSensors; ++i) {
        model.offset[i] = offset_dist(rng);
        if (i < config.n_constant_sensors) {
            model.slope[i] = 0.0;
        } else {
            model.slope[i] = slope_mag(rng) * (negate(rng) ? -1.0 : 1.0);
        }
    }

    std::uniform_int_distribution<int> life_dist(config.min_life, config.max_life);

    SynthResult result;
    result.train.reserve(config.n_engines);
    for (int u = 1; u <= config.n_engines; ++u) {
        int life = life_dist(rng);
        result.train.push_back(make_engine(u, life, life, config, model, rng));
    }

    result.test.reserve(config.n_engines);
    for (int u = 1; u <= config.n_engines; ++u) {
        int life = life_dist(rng);
        int lo = static_cast<int>(std::ceil(0.3 * life));
        int hi = static_cast<int>(std::floor(0.9 * life));
        if (lo < 1) lo = 1;
        if (hi < lo) hi = lo;
        std::uniform_int_distribution<int> trunc_dist(lo, hi);
        int keep = trunc_dist(rng);
        result.test.push_back(make_engine(u, life, keep, config, model, rng));
        result.truth.terminal_rul.push_back(life - keep);
    }
    return result;
}

}  // namespace rulkit
