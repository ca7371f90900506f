// SPDX-License-Identifier: Apache-2.0
//
// riscdm: conditional diffusion channel generation for double-RIS links
// Copyright (C) 2026 The riscdm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "riscdm/evaluation.hpp"

#include "riscdm/io.hpp"
#include "riscdm/network.hpp"
#include "riscdm/parallel.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace riscdm {

ComplexMatrix zero_fill_baseline(const ComplexMatrix &partial, const RealVector &indicator)
{
    require(indicator.size() == partial.cols(), "zero_fill: indicator length must equal M2",
            ErrorCode::geometry_mismatch);
    return partial;
}

RealMatrix cascaded_column_covariance(const SpatialCorrelation &corr2)
{
    return corr2.matrix.cwiseProduct(corr2.matrix);
}

ComplexMatrix lmmse_oracle(const ComplexMatrix &partial, const RealVector &indicator,
                           const RealMatrix &cov, double noise_variance)
{
    const Index m2 = partial.cols();
    require(indicator.size() == m2 && cov.rows() == m2 && cov.cols() == m2,
            "lmmse: indicator and covariance must match M2", ErrorCode::geometry_mismatch);
    require(noise_variance >= 0.0, "lmmse: noise variance must be >= 0");
    std::vector<Index> obs, mis;
    for (Index j = 0; j < m2; ++j)
        (indicator(j) > 0.5 ? obs : mis).push_back(j);
    require(!obs.empty(), "lmmse: no observed columns");
    ComplexMatrix out = partial;
    if (mis.empty())
        return out;
    RealMatrix soo = cov(obs, obs);
    const double load = noise_variance + 1e-10 * soo.diagonal().mean();
    soo.diagonal().array() += load;
    const Eigen::LLT<RealMatrix> llt(soo);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::not_psd, "lmmse: observed-block covariance is singular");
    // W = Sigma_mo Sigma_oo^-1, applied to every BS-antenna row at once.
    const RealMatrix w = llt.solve(RealMatrix(cov(obs, mis))).transpose();
    const ComplexMatrix bo = partial(Eigen::all, obs);
    out(Eigen::all, mis) = bo * w.transpose().cast<Complex>();
    return out;
}

ComplexMatrix lmmse_oracle(const ComplexMatrix &partial, const RealVector &indicator,
                           const SpatialCorrelation &corr2, double noise_variance)
{
    return lmmse_oracle(partial, indicator, cascaded_column_covariance(corr2), noise_variance);
}

void CdmSettings::validate() const
{
    guidance.validate();
    require(posterior_samples >= 1, "cdm: posterior_samples must be >= 1", ErrorCode::invalid_config);
    require(chunk_trials >= 1, "cdm: chunk_trials must be >= 1", ErrorCode::invalid_config);
}

std::vector<ComplexMatrix> cdm_estimate(const Checkpoint &ckpt, std::span<const CdmInput> inputs,
                                        const CdmSettings &settings, std::uint64_t seed)
{
    settings.validate();
    const Index n = ckpt.params.n_antennas, m2 = ckpt.params.m2_elements;
    for (const auto &in : inputs)
        require(in.masked.partial.rows() == n && in.masked.partial.cols() == m2 &&
                    in.masked.indicator.size() == m2 && in.pilot.size() == n,
                "cdm: input is " + std::to_string(in.masked.partial.rows()) + "x" +
                    std::to_string(in.masked.partial.cols()) + " but the checkpoint serves " +
                    std::to_string(n) + "x" + std::to_string(m2),
                ErrorCode::geometry_mismatch);
    const Schedule schedule = ckpt.schedule();
    const Index count = Index(inputs.size()), k = settings.posterior_samples;
    const Index chunk = settings.chunk_trials;
    std::vector<ComplexMatrix> out(static_cast<std::size_t>(count));
    parallel_for((count + chunk - 1) / chunk, settings.threads, [&](Index c) {
        const Index begin = c * chunk, end = std::min(count, begin + chunk);
        std::vector<ConditionVector> conds;
        std::vector<double> scales;
        for (Index i = begin; i < end; ++i) {
            const auto &in = inputs[std::size_t(i)];
            PreparedCondition pc = prepare_condition(in.masked, in.pilot, ckpt.signal_power);
            conds.push_back(std::move(pc.condition));
            scales.push_back(pc.channel_scale);
        }
        const ConditionBatch batch = ConditionBatch::from(conds).repeated(k);
        const ConditionedDenoiser model(ckpt.params, batch);
        Rng rng = derive_stream(seed, {stream::inference, std::uint64_t(c)});
        const RealMatrix x = sample(model, schedule, settings.guidance, batch.size(), rng, settings.noise);
        for (Index i = begin; i < end; ++i) {
            const Index local = i - begin;
            const RealVector mean = x.middleCols(local * k, k).rowwise().mean();
            ComplexMatrix b = devectorize(mean * scales[std::size_t(local)], n, m2);
            const auto &masked = inputs[std::size_t(i)].masked;
            if (settings.data_consistency)
                for (Index j = 0; j < m2; ++j)
                    if (masked.indicator(j) > 0.5)
                        b.col(j) = masked.partial.col(j);
            out[std::size_t(i)] = std::move(b);
        }
    });
    return out;
}

ComplexMatrix cdm_estimate(const Checkpoint &ckpt, const MaskedChannel &masked,
                           const ComplexVector &pilot, const CdmSettings &settings,
                           std::uint64_t seed)
{
    const CdmInput in{masked, pilot};
    return cdm_estimate(ckpt, std::span<const CdmInput>(&in, 1), settings, seed).front();
}

double EvalRecord::ci95() const
{
    return n_trials > 0 ? 1.96 * nmse_std / std::sqrt(double(n_trials)) : 0.0;
}

bool method_needs_checkpoint(const std::string &method)
{
    return method == "cdm" || method == "cdm_nodc";
}

namespace {

bool known_method(const std::string &m)
{
    return m == "zero_fill" || m == "lmmse" || method_needs_checkpoint(m);
}

} // namespace

void SweepConfig::validate() const
{
    auto check = [](bool ok, const std::string &msg) { require(ok, msg, ErrorCode::invalid_config); };
    check(!snr_db.empty() && !mask_ratios.empty() && !geometries.empty() && !methods.empty() &&
              !lambda2.empty(),
          "sweep: every grid must be non-empty");
    check(trials >= 1, "sweep: trials must be >= 1");
    check(posterior_samples >= 1, "sweep: posterior_samples must be >= 1");
    check(calibration_draws >= 1, "sweep: calibration_draws must be >= 1");
    for (double s : snr_db)
        check(std::isfinite(s), "sweep: SNR values must be finite");
    for (double l : lambda2)
        check(l >= 0.0 && l <= 1.0, "sweep: lambda2 values must lie in [0, 1]");
    for (const auto &m : methods)
        check(known_method(m), "sweep: unknown method '" + m + "'");
    for (const auto &g : geometries) {
        try {
            g.validate();
        } catch (const Error &e) {
            throw Error(ErrorCode::invalid_config, e.what());
        }
        for (double r : mask_ratios)
            check(r >= 0.0 && r < 1.0 && std::llround(r * double(g.m2_elements)) < g.m2_elements,
                  "sweep: mask ratio leaves no observed RIS2 element");
    }
}

std::string geometry_key(const SystemGeometry &g)
{
    return std::to_string(g.n_bs_antennas) + "x" + std::to_string(g.m1_elements) + "x" +
           std::to_string(g.m2_elements);
}

std::string checkpoint_filename(const SystemGeometry &g) { return "cdm_" + geometry_key(g) + ".ckpt"; }

CheckpointSet load_checkpoints(const std::filesystem::path &dir,
                               const std::vector<SystemGeometry> &geometries)
{
    CheckpointSet set;
    for (const auto &g : geometries) {
        const auto path = dir / checkpoint_filename(g);
        if (!std::filesystem::exists(path))
            continue;
        Checkpoint c = load_checkpoint(path);
        require_geometry(c, g);
        set.emplace(geometry_key(g), std::move(c));
    }
    return set;
}

namespace {

struct Trial {
    ComplexMatrix truth;
    CdmInput input;
};

// Trial streams: realization and m from {gi, i, 0}, mask from {gi, i, 1, ri},
// pilot noise from {gi, i, 2, si}.
Trial make_trial(const SweepConfig &cfg, const SystemGeometry &g, const SpatialCorrelation &c1,
                 const SpatialCorrelation &c2, double power, std::uint64_t gi, std::uint64_t ri,
                 std::uint64_t si, Index i)
{
    const auto ti = std::uint64_t(i);
    Rng rng = derive_stream(cfg.seed, {stream::sweep, gi, ti, 0});
    const ChannelRealization real = sample_realization(g, c1, c2, rng);
    const Index m = Index(rng() % std::uint64_t(g.m1_elements));
    Trial t;
    t.truth = compose_cascaded(real, m).b_matrix;
    const MaskSpec mask = MaskSpec::random(g.m2_elements, cfg.mask_ratios[ri],
                                           derive_seed(cfg.seed, {stream::sweep, gi, ti, 1, ri}));
    t.input.masked = apply_mask(t.truth, mask);
    Rng noise = derive_stream(cfg.seed, {stream::sweep, gi, ti, 2, si});
    t.input.pilot = simulate_pilot(real, cfg.snr_db[si], power, noise).y;
    return t;
}

EvalRecord summarize(std::string method, const SweepConfig &cfg, const SystemGeometry &g,
                     double snr, double rho, double lambda2, std::vector<double> trial_nmse)
{
    EvalRecord r;
    r.method = std::move(method);
    r.snr_db = snr;
    r.rho = rho;
    r.n = g.n_bs_antennas;
    r.m1 = g.m1_elements;
    r.m2 = g.m2_elements;
    r.lambda2 = lambda2;
    r.n_trials = Index(trial_nmse.size());
    r.seed = cfg.seed;
    // Plain left-to-right sums: a vectorized reduction over a std::vector buffer
    // splits at an alignment boundary that depends on the allocator, and so on --threads.
    const double count = double(trial_nmse.size());
    r.nmse_mean = std::accumulate(trial_nmse.begin(), trial_nmse.end(), 0.0) / count;
    double squares = 0.0;
    for (double x : trial_nmse)
        squares += (x - r.nmse_mean) * (x - r.nmse_mean);
    r.nmse_std = trial_nmse.size() > 1 ? std::sqrt(squares / (count - 1.0)) : 0.0;
    r.trial_nmse = std::move(trial_nmse);
    return r;
}

} // namespace

SweepResult run_sweep(const SweepConfig &cfg, const CheckpointSet &checkpoints, Index threads,
                      const std::function<void(const EvalRecord &)> &progress)
{
    cfg.validate();
    SweepResult result;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto emit = [&](EvalRecord r) {
        if (progress)
            progress(r);
        result.records.push_back(std::move(r));
    };
    for (std::size_t gi = 0; gi < cfg.geometries.size(); ++gi) {
        const SystemGeometry &g = cfg.geometries[gi];
        const SpatialCorrelation c1 = build_correlation_matrix(g.m1_elements, g.element_spacing);
        const SpatialCorrelation c2 = build_correlation_matrix(g.m2_elements, g.element_spacing);
        const RealMatrix cov = cascaded_column_covariance(c2);
        Rng cal = derive_stream(cfg.seed, {stream::calibration, gi});
        const double power = calibrate_signal_power(g, c1, c2, cal, cfg.calibration_draws);
        const auto ck = checkpoints.find(geometry_key(g));

        for (std::size_t ri = 0; ri < cfg.mask_ratios.size(); ++ri)
            for (std::size_t si = 0; si < cfg.snr_db.size(); ++si) {
                const double snr = cfg.snr_db[si], rho = cfg.mask_ratios[ri];
                std::vector<Trial> trials(std::size_t(cfg.trials));
                parallel_for(cfg.trials, threads, [&](Index i) {
                    trials[std::size_t(i)] = make_trial(cfg, g, c1, c2, power, gi, ri, si, i);
                });
                auto score = [&](auto &&estimate) {
                    std::vector<double> v(trials.size());
                    for (std::size_t i = 0; i < trials.size(); ++i)
                        v[i] = nmse(estimate(i), trials[i].truth);
                    return v;
                };
                for (const auto &method : cfg.methods) {
                    if (method == "zero_fill") {
                        emit(summarize(method, cfg, g, snr, rho, nan, score([&](std::size_t i) {
                                           const auto &m = trials[i].input.masked;
                                           return zero_fill_baseline(m.partial, m.indicator);
                                       })));
                    } else if (method == "lmmse") {
                        emit(summarize(method, cfg, g, snr, rho, nan, score([&](std::size_t i) {
                                           const auto &m = trials[i].input.masked;
                                           return lmmse_oracle(m.partial, m.indicator, cov, 0.0);
                                       })));
                    } else if (ck == checkpoints.end()) {
                        result.warnings.push_back("no checkpoint " + checkpoint_filename(g) +
                                                  " for geometry " + geometry_key(g) +
                                                  "; skipped " + method + " at snr " +
                                                  std::to_string(snr) + " dB, rho " +
                                                  std::to_string(rho));
                    } else {
                        std::vector<CdmInput> inputs;
                        for (const auto &t : trials)
                            inputs.push_back(t.input);
                        for (std::size_t li = 0; li < cfg.lambda2.size(); ++li) {
                            CdmSettings s;
                            s.guidance.lambda2 = cfg.lambda2[li];
                            s.posterior_samples = cfg.posterior_samples;
                            s.data_consistency = method == "cdm";
                            s.threads = threads;
                            const auto est = cdm_estimate(
                                ck->second, inputs, s,
                                derive_seed(cfg.seed, {stream::inference, gi, ri, si, li}));
                            emit(summarize(method, cfg, g, snr, rho, cfg.lambda2[li],
                                           score([&](std::size_t i) { return est[i]; })));
                        }
                    }
                }
            }
    }
    return result;
}

namespace {

std::string num(double v)
{
    if (std::isnan(v))
        return "nan";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::vector<std::string> split(const std::string &line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

double parse_double(const std::string &s)
{
    if (s == "nan")
        return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    require(r.ec == std::errc() && r.ptr == s.data() + s.size(), "csv: bad number '" + s + "'",
            ErrorCode::io);
    return v;
}

template <typename Int>
Int parse_int(const std::string &s)
{
    Int v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    require(r.ec == std::errc() && r.ptr == s.data() + s.size(), "csv: bad integer '" + s + "'",
            ErrorCode::io);
    return v;
}

} // namespace

std::string format_sweep_csv(std::span<const EvalRecord> records)
{
    std::string out = std::string(sweep_csv_header) + "\n";
    for (const auto &r : records)
        out += r.method + "," + num(r.snr_db) + "," + num(r.rho) + "," + std::to_string(r.n) + "," +
               std::to_string(r.m1) + "," + std::to_string(r.m2) + "," + num(r.lambda2) + "," +
               std::to_string(r.n_trials) + "," + num(r.nmse_mean) + "," + num(r.nmse_std) + "," +
               std::to_string(r.seed) + "\n";
    return out;
}

void write_sweep_csv(const std::filesystem::path &path, std::span<const EvalRecord> records)
{
    const std::string text = format_sweep_csv(records);
    io::atomic_write(path, [&](std::ostream &out) { out << text; });
}

std::vector<EvalRecord> parse_sweep_csv(const std::string &text)
{
    std::istringstream in(text);
    std::string line;
    require(bool(std::getline(in, line)) && line == sweep_csv_header, "csv: missing or wrong header",
            ErrorCode::io);
    std::vector<EvalRecord> out;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const auto c = split(line);
        require(c.size() == 11, "csv: expected 11 fields in '" + line + "'", ErrorCode::io);
        EvalRecord r;
        r.method = c[0];
        r.snr_db = parse_double(c[1]);
        r.rho = parse_double(c[2]);
        r.n = parse_int<Index>(c[3]);
        r.m1 = parse_int<Index>(c[4]);
        r.m2 = parse_int<Index>(c[5]);
        r.lambda2 = parse_double(c[6]);
        r.n_trials = parse_int<Index>(c[7]);
        r.nmse_mean = parse_double(c[8]);
        r.nmse_std = parse_double(c[9]);
        r.seed = parse_int<std::uint64_t>(c[10]);
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace riscdm
