#include "flexdecode/synth.hpp"

#include "flexdecode/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace flexdecode {

namespace {

enum Stream : std::uint32_t {
    kStatesStream = 1,
    kAmplitudeStream = 2,
    kModelStream = 3,
    kNoiseStream = 4,
    kChannelStreamBase = 1000,
};

SynthRng stream_rng(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32), stream};
    std::array<std::uint32_t, 2> words{};
    seq.generate(words.begin(), words.end());
    return SynthRng((static_cast<std::uint64_t>(words[0]) << 32) | words[1]);
}

std::vector<Segment> sample_segments(const SynthSpec& spec) {
    SynthRng rng = stream_rng(spec.seed, kStatesStream);
    std::vector<Segment> segs;
    std::vector<int> cycle;
    Index t = 0;
    bool moving = false;
    while (t < spec.n_samples) {
        int state = kRestState;
        if (moving) {
            if (cycle.empty()) {
                cycle = {1, 2, 3, 4, 5};
                for (Index i = 4; i > 0; --i) std::swap(cycle[static_cast<std::size_t>(i)], cycle[static_cast<std::size_t>(rng.below(i + 1))]);
            }
            state = cycle.back();
            cycle.pop_back();
        }
        const Index dwell = spec.dwell_min + rng.geometric(spec.dwell_mean - static_cast<double>(spec.dwell_min));
        const Index end = std::min(spec.n_samples, t + dwell);
        segs.push_back({t, end, state});
        t = end;
        moving = !moving;
    }
    return segs;
}

// Plateau with raised-cosine ramps, peak 1.
double bump_shape(Index i, Index len, Index ramp) {
    if (ramp <= 0) return 1.0;
    const auto x = [&](Index k) { return 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(k + 1) / static_cast<double>(ramp + 1)); };
    if (i < ramp) return x(i);
    if (i >= len - ramp) return x(len - 1 - i);
    return 1.0;
}

}  // namespace

SynthRng::SynthRng(std::uint64_t seed) : engine_(seed) {}

double SynthRng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SynthRng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
}

Index SynthRng::geometric(double mean) {
    if (mean <= 0.0) return 0;
    const double p = 1.0 / (1.0 + mean);
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return static_cast<Index>(std::floor(std::log(u) / std::log1p(-p)));
}

Index SynthRng::below(Index n) {
    if (n <= 0) throw ParameterError("empty range");
    return static_cast<Index>(uniform() * static_cast<double>(n));
}

void SynthSpec::validate() const {
    const Index needed = static_cast<Index>(state_channels_per_finger) * kNumFingers + n_drive_channels;
    if (state_channels_per_finger < 1 || n_drive_channels < 1) {
        throw ParameterError("need at least one state channel per finger and one drive channel");
    }
    if (n_channels < needed) {
        throw ParameterError("n_channels must be at least " + std::to_string(needed));
    }
    if (n_samples < 1 || !(rate_hz > 0.0)) throw ParameterError("invalid synthetic length or rate");
    if (dwell_min < 1 || dwell_mean < static_cast<double>(dwell_min)) {
        throw ParameterError("dwell times must be >= 1 and the mean >= the minimum");
    }
    if (sigma < 0.0 || drive_gain <= 0.0 || ramp_s < 0.0) throw ParameterError("invalid synthetic amplitudes");
}

SynthData generate(const SynthSpec& spec) {
    spec.validate();
    const Index n = spec.n_samples;
    const Index n_ch = spec.n_channels;
    const Index n_state_ch = static_cast<Index>(spec.state_channels_per_finger) * kNumFingers;

    const std::vector<Segment> segs = sample_segments(spec);
    std::vector<int> states(static_cast<std::size_t>(n));
    for (const auto& s : segs) std::fill(states.begin() + s.start, states.begin() + s.end, s.state);

    // Shared movement drive.
    Vector drive = Vector::Zero(n);
    {
        SynthRng rng = stream_rng(spec.seed, kAmplitudeStream);
        const auto ramp_len = static_cast<Index>(std::llround(spec.ramp_s * spec.rate_hz));
        for (const auto& s : segs) {
            if (s.state == kRestState) continue;
            const double amp = 0.7 + 0.3 * rng.uniform();
            const Index len = s.end - s.start;
            const Index ramp = std::min(ramp_len, len / 4);
            for (Index i = 0; i < len; ++i) drive(s.start + i) = amp * bump_shape(i, len, ramp);
        }
    }

    SynthRng model_rng = stream_rng(spec.seed, kModelStream);
    Vector loading(spec.n_drive_channels);
    for (Index d = 0; d < loading.size(); ++d) loading(d) = 0.6 + 0.4 * model_rng.uniform();

    Matrix samples(n, n_ch);
    constexpr Index kBurnIn = 200;
    for (Index c = 0; c < n_ch; ++c) {
        SynthRng rng = stream_rng(spec.seed, kChannelStreamBase + static_cast<std::uint32_t>(c));
        const int owner = c < n_state_ch ? static_cast<int>(c / spec.state_channels_per_finger) + 1 : 0;
        double x1 = 0.0, x2 = 0.0;
        for (Index t = -kBurnIn; t < n; ++t) {
            const bool active = t >= 0 && owner != 0 && states[static_cast<std::size_t>(t)] == owner;
            const auto& ar = active ? spec.moving_ar : spec.rest_ar;
            const double x = ar[0] * x1 + ar[1] * x2 + rng.normal();
            x2 = x1;
            x1 = x;
            if (t >= 0) samples(t, c) = x;
        }
        const Index d = c - n_state_ch;
        if (d >= 0 && d < spec.n_drive_channels) samples.col(c) += spec.drive_gain * loading(d) * drive;
    }

    SynthTruth truth;
    truth.baseline.resize(kNumFingers);
    for (Index j = 0; j < kNumFingers; ++j) truth.baseline(j) = model_rng.uniform() - 0.5;
    for (int k = 1; k <= kNumStates; ++k) {
        Matrix G = Matrix::Zero(n_ch, kNumFingers);
        if (k != kRestState) {
            Vector w(spec.n_drive_channels);
            for (Index d = 0; d < w.size(); ++d) w(d) = 0.5 + 0.5 * model_rng.uniform();
            const double gain = 1.0 + model_rng.uniform();
            // Normalized so that the drive reaches the finger with unit gain times `gain`.
            w *= gain / (spec.drive_gain * w.dot(loading));
            G.block(n_state_ch, k - 1, spec.n_drive_channels, 1) = w;
        }
        truth.G[static_cast<std::size_t>(k - 1)] = std::move(G);
    }

    MultichannelSignal ecog(std::move(samples), spec.rate_hz);
    const Index window = savgol_window_length(spec.sg_width_s, spec.rate_hz);
    truth.smoothed.resize(n, n_ch);
    for (Index c = 0; c < n_ch; ++c) {
        truth.smoothed.col(c) = savgol_smooth(ecog.samples().col(c), spec.sg_order, window);
    }

    Matrix flex(n, kNumFingers);
    SynthRng noise_rng = stream_rng(spec.seed, kNoiseStream);
    for (Index t = 0; t < n; ++t) {
        const auto& G = truth.G[static_cast<std::size_t>(states[static_cast<std::size_t>(t)] - 1)];
        flex.row(t) = truth.baseline.transpose() + truth.smoothed.row(t) * G;
        if (spec.sigma > 0.0) {
            for (Index j = 0; j < kNumFingers; ++j) flex(t, j) += spec.sigma * noise_rng.normal();
        }
    }

    StateSequence seq(std::move(states));
    return {std::move(ecog), FlexionRecord(std::move(flex), spec.rate_hz), seq, SegmentList(segs, n),
            std::move(truth)};
}

}  // namespace flexdecode
