#pragma once

#include "flexdecode/core.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <vector>

namespace flexdecode {

/// Parameters of the synthetic switching-model generator.
///
/// Layout of the generated channels: the first `state_channels_per_finger * 5`
/// channels are state channels (finger k owns a contiguous group whose AR
/// dynamics change while k moves); the next `n_drive_channels` carry a slow
/// movement drive shared by every finger; the rest are plain AR noise.
///
/// Flexion of the moving finger k is G_k^T applied to the Savitzky-Golay
/// smoothed channels (the same smoothing the flexion features use), so the
/// per-state linear model is exactly the right model class. Every other
/// finger stays at its baseline; sigma adds white noise to all fingers.
struct SynthSpec {
    Index n_channels = 16;
    Index n_samples = 15000;
    double rate_hz = 250.0;

    int state_channels_per_finger = 2;
    int n_drive_channels = 3;
    std::array<double, 2> rest_ar{0.2, 0.1};
    std::array<double, 2> moving_ar{1.5, -0.8};
    double drive_gain = 3.0;
    double ramp_s = 0.1;

    double dwell_mean = 250.0;  // samples
    Index dwell_min = 1;
    double sigma = 0.0;

    int sg_order = 3;
    double sg_width_s = 0.4;

    std::uint64_t seed = 1;

    void validate() const;
};

struct SynthTruth {
    std::array<Matrix, kNumStates> G;  // n_channels x 5 each; G_6 = 0
    Vector baseline;                   // 5 per-finger resting positions
    Matrix smoothed;                   // smoothed channels the flexion is built from
};

struct SynthData {
    MultichannelSignal ecog;
    FlexionRecord flex;
    StateSequence states;
    SegmentList segments;
    SynthTruth truth;
};

/// Deterministic for a given spec (own RNG algorithms, per-channel derived seeds).
SynthData generate(const SynthSpec& spec);

/// The random source behind `generate`. std::mt19937_64 supplies the bits;
/// the conversions are spelled out here because the std distributions are
/// not specified bit-for-bit across standard libraries.
class SynthRng {
public:
    explicit SynthRng(std::uint64_t seed);
    double uniform();  // [0, 1)
    double normal();
    Index geometric(double mean);  // support {0, 1, ...}
    Index below(Index n);          // uniform integer in [0, n)

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace flexdecode
