#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "casebias/casebias.hpp"

using json = nlohmann::ordered_json;
using namespace casebias;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitInfeasible = 2;

// Six significant digits, stored back as a double so the JSON stays numeric.
json num(double x) {
    if (!std::isfinite(x)) return std::isnan(x) ? json("nan") : json(x > 0 ? "inf" : "-inf");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return json(std::stod(buf));
}

json num_list(const std::vector<double>& xs) {
    json a = json::array();
    for (double x : xs) a.push_back(num(x));
    return a;
}

struct Report {
    json inputs = json::object();
    json outputs = json::object();
    json flags = json::array();
    bool infeasible = false;

    void flag(const std::string& f, bool marks_infeasible = false) {
        flags.push_back(f);
        infeasible = infeasible || marks_infeasible;
    }
    std::string dump() const {
        json j;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        j["flags"] = flags;
        return j.dump(2) + "\n";
    }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::InvalidArgument, "--out: cannot write '" + path + "'");
    out << text;
}

// CSV-producing commands: CSV to --out with JSON summary on stdout, or CSV on stdout.
int emit_csv(const std::string& out_path, const std::string& csv, Report& rep) {
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        write_text(out_path, csv);
        rep.outputs["csv"] = out_path;
        std::cout << rep.dump();
    }
    return rep.infeasible ? kExitInfeasible : kExitOk;
}

int emit_json(const std::string& out_path, const Report& rep) {
    if (out_path.empty())
        std::cout << rep.dump();
    else
        write_text(out_path, rep.dump());
    return rep.infeasible ? kExitInfeasible : kExitOk;
}

MeasurementModel measurement(double fp, double fn) {
    MeasurementModel m{fp, fn};
    if (!(fp + fn < 1.0)) throw Error(ErrorKind::InvalidArgument, "--fp/--fn: fp + fn must be below 1");
    return m;
}

struct SirOpts {
    double beta = 1.4;
    double gamma = 0.2;
    double N = 1e6;
    double i0 = 100;
    double dt = 0.1;
    std::size_t horizon = 1500;

    void add(CLI::App* c, bool with_beta = true) {
        if (with_beta) c->add_option("--beta", beta, "transmission rate")->check(CLI::PositiveNumber);
        c->add_option("--gamma", gamma, "removal rate of the SIR model")->check(CLI::PositiveNumber);
        c->add_option("--N", N, "population size")->check(CLI::Range(2.0, 1e12));
        c->add_option("--i0", i0, "initial infected count")->check(CLI::NonNegativeNumber);
        c->add_option("--dt", dt, "step size")->check(CLI::PositiveNumber);
        c->add_option("--horizon", horizon, "number of steps")->check(CLI::PositiveNumber);
    }
    SirParams params(double b) const { return SirParams::with_seed_cases(b, gamma, N, i0, dt, horizon); }
    void record(json& in, bool with_beta = true) const {
        if (with_beta) in["beta"] = num(beta);
        in["gamma_rec"] = num(gamma);
        in["N"] = num(N);
        in["i0"] = num(i0);
        in["dt"] = num(dt);
        in["horizon"] = horizon;
    }
};

std::vector<double> default_ybar_grid() { return {0.016, 0.036, 0.056, 0.076, 0.096}; }
std::vector<double> default_M_grid() { return {1.2, 1.4, 1.6, 1.8, 2.0}; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Selection-bias and measurement-error calculus for case-count data"};
    app.set_config("--config", "", "flat key=value configuration file; command-line flags take precedence");
    app.require_subcommand(1);
    app.fallthrough();
    std::string out_path;
    app.add_option("--out", out_path, "write the primary output here instead of stdout");

    // decompose
    auto* dec = app.add_subcommand("decompose", "three-term error decomposition for one scenario");
    double dec_ybar = 0.1, dec_f = 0.026, dec_M = 2.0, dec_fp = 0.0, dec_fn = 0.0;
    std::optional<std::size_t> dec_N;
    std::optional<std::uint64_t> dec_seed;
    dec->add_option("--ybar", dec_ybar, "population prevalence")->check(CLI::Range(0.0, 1.0));
    dec->add_option("--f", dec_f, "overall sampling fraction")->check(CLI::Range(0.0, 1.0));
    dec->add_option("--M", dec_M, "relative sampling rate f1/f0")->check(CLI::PositiveNumber);
    dec->add_option("--fp", dec_fp, "false-positive rate")->check(CLI::Range(0.0, 1.0));
    dec->add_option("--fn", dec_fn, "false-negative rate")->check(CLI::Range(0.0, 1.0));
    dec->add_option("--N", dec_N, "draw one realization of this population size");
    dec->add_option("--seed", dec_seed, "seed for the realization (required with --N)");

    // neff
    auto* nef = app.add_subcommand("neff", "effective-sample-size table");
    double nef_f = 0.026, nef_fp = 0.0, nef_fn = 0.0;
    std::vector<double> nef_ybar = default_ybar_grid(), nef_M = default_M_grid();
    std::string nef_rounding = "nearest";
    nef->add_option("--f", nef_f, "sampling fraction")->check(CLI::Range(0.0, 1.0));
    nef->add_option("--ybar-grid", nef_ybar, "prevalence rows")->delimiter(',');
    nef->add_option("--M-grid", nef_M, "relative sampling rate columns")->delimiter(',');
    nef->add_option("--fp", nef_fp, "false-positive rate")->check(CLI::Range(0.0, 1.0));
    nef->add_option("--fn", nef_fn, "false-negative rate")->check(CLI::Range(0.0, 1.0));
    nef->add_option("--rounding", nef_rounding, "nearest or floor")->check(CLI::IsMember({"nearest", "floor"}));

    // sir
    auto* sir = app.add_subcommand("sir", "SIR trajectory");
    SirOpts sir_o;
    sir_o.add(sir);

    // bias-curves
    auto* bc = app.add_subcommand("bias-curves", "ratio and R_t bias along an SIR trajectory");
    SirOpts bc_o;
    bc_o.add(bc);
    double bc_f = 0.02, bc_fp = 0.01, bc_fn = 0.15, bc_si = 7.0;
    std::vector<double> bc_M{2.0, 4.0};
    bool bc_exact_s = false;
    bc->add_option("--f", bc_f, "sampling fraction")->check(CLI::Range(0.0, 1.0));
    bc->add_option("--fp", bc_fp, "false-positive rate")->check(CLI::Range(0.0, 1.0));
    bc->add_option("--fn", bc_fn, "false-negative rate")->check(CLI::Range(0.0, 1.0));
    bc->add_option("--M-grid", bc_M, "relative sampling rates")->delimiter(',');
    bc->add_option("--serial-interval", bc_si, "serial interval in days")->check(CLI::PositiveNumber);
    bc->add_flag("--exact-s", bc_exact_s, "include the susceptible-depletion term");

    // rt-gap
    auto* gap = app.add_subcommand("rt-gap", "true and estimated R_t gap between two epidemics");
    SirOpts gap_o;
    gap_o.horizon = 3000;
    gap_o.add(gap, false);
    double gap_ba = 1.4, gap_bb = 0.9, gap_f = 0.02, gap_fp = 0.01, gap_fn = 0.2, gap_M = 4.0, gap_si = 7.0;
    gap->add_option("--beta-a", gap_ba, "transmission rate of country A")->check(CLI::PositiveNumber);
    gap->add_option("--beta-b", gap_bb, "transmission rate of country B")->check(CLI::PositiveNumber);
    gap->add_option("--f", gap_f, "sampling fraction")->check(CLI::Range(0.0, 1.0));
    gap->add_option("--fp", gap_fp, "false-positive rate")->check(CLI::Range(0.0, 1.0));
    gap->add_option("--fn", gap_fn, "false-negative rate")->check(CLI::Range(0.0, 1.0));
    gap->add_option("--M", gap_M, "relative sampling rate")->check(CLI::PositiveNumber);
    gap->add_option("--serial-interval", gap_si, "serial interval in days")->check(CLI::PositiveNumber);

    // sensitivity
    auto* sen = app.add_subcommand("sensitivity", "relative sampling rate from a survey anchor");
    std::optional<double> sen_error, sen_ybar, sen_f, sen_obs_adj, sen_pop;
    std::string sen_series;
    bool sen_cumulative = false;
    double sen_alpha = 0.3, sen_survey = 0.139, sen_fp = 0.005, sen_fn = 0.172;
    std::vector<double> sen_fp_range, sen_fn_range;
    sen->add_option("--error", sen_error, "observed minus survey prevalence (point mode)");
    sen->add_option("--ybar", sen_ybar, "anchor prevalence (point mode)")->check(CLI::Range(0.0, 1.0));
    sen->add_option("--f", sen_f, "testing fraction")->check(CLI::Range(0.0, 1.0));
    sen->add_option("--series", sen_series, "CSV date,total_tests,positive_tests")->check(CLI::ExistingFile);
    sen->add_flag("--cumulative", sen_cumulative, "series holds cumulative counts");
    sen->add_option("--alpha", sen_alpha, "exponential smoothing weight")->check(CLI::Range(0.0, 1.0));
    sen->add_option("--population", sen_pop, "population size, used to derive --f from the series");
    sen->add_option("--observed-adjusted", sen_obs_adj, "corrected observed prevalence (overrides --series)");
    sen->add_option("--survey-raw", sen_survey, "survey positive fraction before correction")
        ->check(CLI::Range(0.0, 1.0));
    sen->add_option("--fp", sen_fp, "false-positive rate")->check(CLI::Range(0.0, 1.0));
    sen->add_option("--fn", sen_fn, "false-negative rate")->check(CLI::Range(0.0, 1.0));
    sen->add_option("--fp-range", sen_fp_range, "low,high")->delimiter(',')->expected(2);
    sen->add_option("--fn-range", sen_fn_range, "low,high")->delimiter(',')->expected(2);

    // compare
    auto* cmp = app.add_subcommand("compare", "two-population prevalence and count comparisons");
    double c_N1 = 328e6, c_N2 = 38e6, c_f1 = 0.023, c_f2 = 0.023, c_y1 = 0.1, c_y2 = 0.1, c_M1 = 1.0, c_M2 = 1.0;
    double c_fp = 0.0, c_fn = 0.0;
    std::optional<double> c_obs1, c_obs2;
    cmp->add_option("--N1", c_N1, "size of population 1")->check(CLI::Range(2.0, 1e12));
    cmp->add_option("--N2", c_N2, "size of population 2")->check(CLI::Range(2.0, 1e12));
    cmp->add_option("--f1", c_f1, "sampling fraction 1")->check(CLI::Range(0.0, 1.0));
    cmp->add_option("--f2", c_f2, "sampling fraction 2")->check(CLI::Range(0.0, 1.0));
    cmp->add_option("--ybar1", c_y1, "true prevalence 1")->check(CLI::Range(0.0, 1.0));
    cmp->add_option("--ybar2", c_y2, "true prevalence 2")->check(CLI::Range(0.0, 1.0));
    cmp->add_option("--observed1", c_obs1, "observed prevalence 1 (default: true plus analytic error)");
    cmp->add_option("--observed2", c_obs2, "observed prevalence 2 (default: true plus analytic error)");
    cmp->add_option("--M1", c_M1, "relative sampling rate 1")->check(CLI::PositiveNumber);
    cmp->add_option("--M2", c_M2, "relative sampling rate 2")->check(CLI::PositiveNumber);
    cmp->add_option("--fp", c_fp, "false-positive rate")->check(CLI::Range(0.0, 1.0));
    cmp->add_option("--fn", c_fn, "false-negative rate")->check(CLI::Range(0.0, 1.0));

    // allocate
    auto* alc = app.add_subcommand("allocate", "Neyman and proportional stratified allocation");
    std::string alc_strata;
    std::size_t alc_n = 1000;
    std::optional<double> alc_N;
    alc->add_option("--strata", alc_strata, "CSV stratum_id,share,prevalence")->required()->check(CLI::ExistingFile);
    alc->add_option("--n", alc_n, "total sample size")->check(CLI::PositiveNumber);
    alc->add_option("--N", alc_N, "population size, enables finite-population corrections");

    // mc-verify
    auto* mcv = app.add_subcommand("mc-verify", "Monte Carlo check of the analytic identities");
    std::uint64_t mc_seed = 0;
    long long mc_reps = 200;
    std::size_t mc_N = 10000;
    double mc_ybar = 0.1, mc_f0 = 0.02, mc_f1 = 0.04, mc_fp = 0.005, mc_fn = 0.172;
    mcv->add_option("--seed", mc_seed, "master seed")->required();
    mcv->add_option("--reps", mc_reps, "replications (at least 2)");
    mcv->add_option("--N", mc_N, "population size")->check(CLI::Range(2, 100000000));
    mcv->add_option("--ybar", mc_ybar, "prevalence")->check(CLI::Range(0.0, 1.0));
    mcv->add_option("--f0", mc_f0, "testing probability of negatives")->check(CLI::Range(0.0, 1.0));
    mcv->add_option("--f1", mc_f1, "testing probability of positives")->check(CLI::Range(0.0, 1.0));
    mcv->add_option("--fp", mc_fp, "false-positive rate")->check(CLI::Range(0.0, 1.0));
    mcv->add_option("--fn", mc_fn, "false-negative rate")->check(CLI::Range(0.0, 1.0));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInvalid;
    }

    try {
        Report rep;
        if (*dec) {
            const MeasurementModel meas = measurement(dec_fp, dec_fn);
            detail::require(dec_ybar > 0.0 && dec_ybar < 1.0, "--ybar must lie in (0,1)");
            detail::require(dec_f > 0.0 && dec_f < 1.0, "--f must lie in (0,1)");
            rep.inputs = {{"ybar", num(dec_ybar)}, {"f", num(dec_f)}, {"M", num(dec_M)},
                          {"fp", num(dec_fp)},     {"fn", num(dec_fn)}};
            const SelectionModel sel = SelectionModel::from_f_M(dec_f, dec_M, dec_ybar);
            const double rho = binary_rho(sel.delta(), dec_ybar, dec_f);
            const double rho_pz = rho_ipz_from_rho_iy(rho, sel, meas, dec_ybar);
            const double spz = sigma_pz(dec_ybar, meas);
            const ErrorDecomposition d = imperfect_error(AnalyticInputs{
                dec_ybar, dec_f, rho, std::sqrt(dec_ybar * (1 - dec_ybar)), rho_pz, spz, meas.fp, meas.fn});
            const AdjustmentFactors adj = adjustment_factors(sel, meas, dec_ybar);
            rep.outputs = {{"f0", num(sel.f0)},
                           {"f1", num(sel.f1)},
                           {"delta", num(sel.delta())},
                           {"rho_iy", num(rho)},
                           {"rho_ipz", num(rho_pz)},
                           {"sigma_pz", num(spz)},
                           {"data_quality_term", num(d.data_quality_term)},
                           {"interaction_term", num(d.interaction_term)},
                           {"bias_term", num(d.bias_term)},
                           {"total_error", num(d.total_error)},
                           {"meas_adjustment", num(adj.meas_adjustment)},
                           {"d_m", num(adj.d_m)},
                           {"expected_error_raw", num(expected_estimator_error(sel, meas, dec_ybar))},
                           {"expected_error_first_order",
                            num(expected_estimator_error(sel, meas, dec_ybar, Estimator::FirstOrder))},
                           {"expected_error_exact_inverse",
                            num(expected_estimator_error(sel, meas, dec_ybar, Estimator::ExactInverse))}};
            if (dec_N) {
                if (!dec_seed) throw Error(ErrorKind::InvalidArgument, "--seed is required with --N");
                rep.inputs["N"] = *dec_N;
                rep.inputs["seed"] = *dec_seed;
                const FinitePopulation pop = make_population(*dec_N, dec_ybar, *dec_seed);
                const EmpiricalStats s = empirical_stats(pop, realize(pop, sel, meas, *dec_seed));
                const ErrorDecomposition e = imperfect_error(s);
                rep.outputs["realization"] = {{"n", s.n},
                                              {"ybar_star", num(s.ybar_star)},
                                              {"actual_error", num(s.error())},
                                              {"rho_iy", num(s.rho_iy)},
                                              {"rho_ipz", num(s.rho_ipz)},
                                              {"sigma_pz", num(s.sigma_pz)},
                                              {"decomposed_error", num(e.total_error)},
                                              {"identity_residual", num(e.total_error - s.error())}};
            }
            return emit_json(out_path, rep);
        }

        if (*nef) {
            std::optional<MeasurementModel> meas;
            if (nef_fp > 0.0 || nef_fn > 0.0) meas = measurement(nef_fp, nef_fn);
            const NeffTable t = neff_table(nef_ybar, nef_M, nef_f, meas,
                                           nef_rounding == "floor" ? Rounding::Floor : Rounding::Nearest);
            rep.inputs = {{"f", num(nef_f)},     {"ybar_grid", num_list(nef_ybar)}, {"M_grid", num_list(nef_M)},
                          {"fp", num(nef_fp)},   {"fn", num(nef_fn)},           {"rounding", nef_rounding}};
            for (std::size_t i = 0; i < t.infinite.size(); ++i)
                for (std::size_t j = 0; j < t.infinite[i].size(); ++j)
                    if (t.infinite[i][j])
                        rep.flag("infinite effective sample size at ybar=" + detail::fmt_label(nef_ybar[i]) +
                                 ", M=" + detail::fmt_label(nef_M[j]));
            return emit_csv(out_path, t.to_csv(), rep);
        }

        if (*sir) {
            const SirTrajectory tr = sir_simulate(sir_o.params(sir_o.beta));
            sir_o.record(rep.inputs);
            const PeakTimes pk = peak_time(tr);
            rep.outputs = {{"R0", num(sir_o.beta / sir_o.gamma)},
                           {"prevalence_peak_step", pk.prevalence},
                           {"incidence_peak_step", pk.incidence},
                           {"peak_prevalence", num(tr.prevalence(pk.prevalence))},
                           {"max_conservation_error", num(tr.max_conservation_error)}};
            if (tr.negative_compartment) rep.flag("negative compartment: reduce --dt", true);
            return emit_csv(out_path, trajectory_csv(tr), rep);
        }

        if (*bc) {
            const MeasurementModel meas = measurement(bc_fp, bc_fn);
            const SirTrajectory tr = sir_simulate(bc_o.params(bc_o.beta));
            const auto curves = bias_curves(tr, bc_f, meas, bc_M, {bc_si, bc_exact_s});
            bc_o.record(rep.inputs);
            rep.inputs["f"] = num(bc_f);
            rep.inputs["fp"] = num(bc_fp);
            rep.inputs["fn"] = num(bc_fn);
            rep.inputs["M_grid"] = num_list(bc_M);
            rep.inputs["serial_interval"] = num(bc_si);
            rep.inputs["exact_s"] = bc_exact_s;
            rep.outputs["prevalence_peak_step"] = peak_time(tr).prevalence;
            for (const auto& c : curves) {
                if (c.skipped_ratio || c.skipped_rt)
                    rep.flag("M=" + detail::fmt_label(c.M) + ": skipped " + std::to_string(c.skipped_ratio) +
                             " ratio and " + std::to_string(c.skipped_rt) + " R_t steps with zero cases");
                if (c.infeasible_rt)
                    rep.flag("M=" + detail::fmt_label(c.M) + ": " + std::to_string(c.infeasible_rt) +
                                 " steps with 1 + e_t <= 0",
                             true);
            }
            return emit_csv(out_path, bias_curves_csv(curves), rep);
        }

        if (*gap) {
            const MeasurementModel meas = measurement(gap_fp, gap_fn);
            const SirTrajectory a = sir_simulate(gap_o.params(gap_ba));
            const SirTrajectory b = sir_simulate(gap_o.params(gap_bb));
            const auto g = rt_gap(a, b, gap_f, meas, gap_M, {gap_si});
            gap_o.record(rep.inputs, false);
            rep.inputs["beta_a"] = num(gap_ba);
            rep.inputs["beta_b"] = num(gap_bb);
            rep.inputs["f"] = num(gap_f);
            rep.inputs["fp"] = num(gap_fp);
            rep.inputs["fn"] = num(gap_fn);
            rep.inputs["M"] = num(gap_M);
            rep.inputs["serial_interval"] = num(gap_si);
            rep.outputs["incidence_peak_step_a"] = peak_time(a).incidence;
            rep.outputs["incidence_peak_step_b"] = peak_time(b).incidence;
            std::size_t skipped = 0, infeasible = 0;
            for (const auto& p : g) {
                skipped += !p.est_gap;
                infeasible += p.infeasible;
            }
            if (skipped) rep.flag(std::to_string(skipped) + " steps without an estimated gap (zero new cases)");
            if (infeasible) rep.flag(std::to_string(infeasible) + " steps with 1 + e <= 0", true);
            return emit_csv(out_path, rt_gap_csv(g), rep);
        }

        if (*sen) {
            const MeasurementModel meas = measurement(sen_fp, sen_fn);
            std::optional<MeasRange> range;
            if (!sen_fp_range.empty() || !sen_fn_range.empty()) {
                const auto pick = [](const std::vector<double>& r, double v) {
                    return r.empty() ? std::pair{v, v} : std::pair{r[0], r[1]};
                };
                const auto [fpl, fph] = pick(sen_fp_range, sen_fp);
                const auto [fnl, fnh] = pick(sen_fn_range, sen_fn);
                range = MeasRange{fpl, fph, fnl, fnh};
                rep.inputs["fp_range"] = num_list({fpl, fph});
                rep.inputs["fn_range"] = num_list({fnl, fnh});
            }
            rep.inputs["fp"] = num(sen_fp);
            rep.inputs["fn"] = num(sen_fn);
            SensitivityResult r;
            if (sen_error) {
                if (!sen_ybar) throw Error(ErrorKind::InvalidArgument, "--ybar is required with --error");
                if (!sen_f) throw Error(ErrorKind::InvalidArgument, "--f is required with --error");
                rep.inputs["error"] = num(*sen_error);
                rep.inputs["ybar"] = num(*sen_ybar);
                rep.inputs["f"] = num(*sen_f);
                r = estimate_relative_sampling(*sen_ybar, *sen_ybar + *sen_error, *sen_f, *sen_ybar, meas, range);
            } else {
                double f = sen_f.value_or(0.0);
                double observed_adjusted = 0.0;
                if (sen_obs_adj) {
                    observed_adjusted = *sen_obs_adj;
                } else {
                    if (sen_series.empty())
                        throw Error(ErrorKind::InvalidArgument,
                                    "--series or --observed-adjusted is required without --error");
                    const CaseCountSeries s = ingest(sen_series, sen_cumulative);
                    const auto smoothed = exp_smooth(s.positive_fraction(), sen_alpha);
                    const double observed_raw = smoothed.back();
                    observed_adjusted = corrected_prevalence(observed_raw, meas).value;
                    rep.inputs["series"] = sen_series;
                    rep.inputs["alpha"] = num(sen_alpha);
                    rep.outputs["observed_raw_smoothed"] = num(observed_raw);
                    if (!s.gaps.empty()) rep.flag(std::to_string(s.gaps.size()) + " date gaps in --series");
                    if (!sen_f) {
                        if (!sen_pop)
                            throw Error(ErrorKind::InvalidArgument, "--f or --population is required with --series");
                        double tests = 0.0;
                        for (auto t : s.total_tests) tests += static_cast<double>(t);
                        f = tests / *sen_pop;
                        rep.inputs["population"] = num(*sen_pop);
                    }
                }
                detail::require(f > 0.0 && f < 1.0, "--f must lie in (0,1)");
                rep.inputs["f"] = num(f);
                rep.inputs["survey_raw"] = num(sen_survey);
                rep.outputs["observed_adjusted"] = num(observed_adjusted);
                rep.outputs["survey_adjusted"] = num(corrected_prevalence(sen_survey, meas).value);
                r = estimate_relative_sampling(SurveyAnchor{sen_survey, observed_adjusted, f}, meas, range);
            }
            rep.outputs["rho_dm"] = num(r.rho_dm);
            rep.outputs["delta"] = num(r.delta);
            rep.outputs["M"] = num(r.M);
            if (r.has_interval) {
                rep.outputs["M_low"] = num(r.ci_low);
                rep.outputs["M_high"] = num(r.ci_high);
            }
            return emit_json(out_path, rep);
        }

        if (*cmp) {
            const MeasurementModel meas = measurement(c_fp, c_fn);
            for (auto [v, key] : {std::pair{c_f1, "--f1"}, {c_f2, "--f2"}, {c_y1, "--ybar1"}, {c_y2, "--ybar2"}})
                detail::require(v > 0.0 && v < 1.0, std::string(key) + " must lie in (0,1)");
            const auto summary = [&](double N, double f, double y, double M, std::optional<double> obs) {
                const SelectionModel sel = SelectionModel::from_f_M(f, M, y);
                PopulationSummary p;
                p.N = N;
                p.f = f;
                p.ybar = y;
                p.rho = binary_rho(sel.delta(), y, f);
                p.d_m = d_m(sel, meas, y);
                p.sigma_y = std::sqrt(y * (1.0 - y));
                p.ybar_hat = obs.value_or(y + p.rho * p.d_m * std::sqrt((1.0 - f) / f) * p.sigma_y);
                return p;
            };
            const PopulationSummary a = summary(c_N1, c_f1, c_y1, c_M1, c_obs1);
            const PopulationSummary b = summary(c_N2, c_f2, c_y2, c_M2, c_obs2);
            rep.inputs = {{"N1", num(c_N1)}, {"N2", num(c_N2)}, {"f1", num(c_f1)}, {"f2", num(c_f2)},
                          {"ybar1", num(c_y1)}, {"ybar2", num(c_y2)}, {"M1", num(c_M1)}, {"M2", num(c_M2)},
                          {"fp", num(c_fp)}, {"fn", num(c_fn)}};
            const ZScore z = prevalence_z(a, b);
            const DiffError cnt = count_diff_error(a, b, a.f * a.N, b.f * b.N);
            const DiffError pc = percapita_diff_error(a, b);
            rep.outputs = {{"observed1", num(a.ybar_hat)},
                           {"observed2", num(b.ybar_hat)},
                           {"z", num(z.z)},
                           {"z_analytic", num(z.z_analytic)},
                           {"population_adjustment", num(population_adjustment(c_N1, c_N2))},
                           {"count_selection_term", num(cnt.selection_term)},
                           {"count_scale_term", num(cnt.scale_term)},
                           {"percapita_selection_term", num(pc.selection_term)},
                           {"percapita_scale_term", num(pc.scale_term)}};
            if (c_f1 == c_f2 && c_y1 == c_y2)
                rep.outputs["delta_gap_threshold"] = num(delta_gap_threshold(c_N1, c_N2, c_f1, c_y1));
            const NeffResult n1 = neff_bound({c_y1, c_M1, c_f1, meas});
            const NeffResult n2 = neff_bound({c_y2, c_M2, c_f2, meas});
            if (!n1.infinite && !n2.infinite && n1.value > 1.0 && n2.value > 1.0 && c_f1 == c_f2) {
                const double pooled = 0.5 * (a.ybar_hat + b.ybar_hat);
                rep.outputs["neff1"] = num(n1.value);
                rep.outputs["neff2"] = num(n2.value);
                rep.outputs["z_eff"] = num(z_eff(a.ybar_hat, b.ybar_hat, n1.value, n2.value, c_f1,
                                                 std::sqrt(pooled * (1.0 - pooled))));
            } else {
                rep.flag("z_eff not computed: needs equal f and finite effective sample sizes above 1");
            }
            return emit_json(out_path, rep);
        }

        if (*alc) {
            auto in = open_input(alc_strata);
            const std::vector<Stratum> strata = read_strata(in);
            const auto ney = neyman_allocation(strata, alc_n);
            const auto prop = proportional_allocation(strata, alc_n);
            rep.inputs = {{"strata", alc_strata}, {"n", alc_n}};
            json ney_j = json::array(), prop_j = json::array();
            for (auto v : ney) ney_j.push_back(v);
            for (auto v : prop) prop_j.push_back(v);
            rep.outputs["neyman"] = ney_j;
            rep.outputs["proportional"] = prop_j;
            rep.outputs["neyman_variance"] = num(design_variance(strata, ney));
            rep.outputs["proportional_variance"] = num(design_variance(strata, prop));
            if (alc_N) {
                rep.inputs["N"] = num(*alc_N);
                rep.outputs["neyman_variance_fpc"] = num(design_variance_fpc(strata, ney, *alc_N));
                rep.outputs["proportional_variance_fpc"] = num(design_variance_fpc(strata, prop, *alc_N));
                rep.outputs["srs_variance"] =
                    num(srs_variance(overall_prevalence(strata), static_cast<double>(alc_n), *alc_N));
            }
            return emit_json(out_path, rep);
        }

        if (*mcv) {
            if (mc_reps < 2) throw Error(ErrorKind::InvalidArgument, "--reps must be at least 2");
            const MeasurementModel meas = measurement(mc_fp, mc_fn);
            const SelectionModel sel{mc_f0, mc_f1};
            detail::require(mc_ybar > 0.0 && mc_ybar < 1.0, "--ybar must lie in (0,1)");
            const FinitePopulation pop = make_population(mc_N, mc_ybar, mc_seed);
            const double y = pop.ybar();
            rep.inputs = {{"seed", mc_seed}, {"reps", mc_reps},  {"N", mc_N},   {"ybar", num(mc_ybar)},
                          {"f0", num(mc_f0)}, {"f1", num(mc_f1)}, {"fp", num(mc_fp)}, {"fn", num(mc_fn)}};
            const auto draws = mc_replicate(pop, sel, meas, static_cast<std::size_t>(mc_reps), mc_seed);
            std::vector<double> rho, rho_pz, err, pair;
            double worst = 0.0;
            const double f = sel.f(y);
            const double rho_model = binary_rho(sel.delta(), y, f);
            const double rho_pz_model = rho_ipz_from_rho_iy(rho_model, sel, meas, y);
            for (const auto& d : draws) {
                if (!d) continue;
                const ErrorDecomposition e = imperfect_error(*d);
                const double scale = std::max({std::abs(e.total_error), std::abs(d->error()), 1e-300});
                worst = std::max(worst, std::abs(e.total_error - d->error()) / scale);
                rho.push_back(d->rho_iy);
                rho_pz.push_back(d->rho_ipz);
                err.push_back(d->error());
                pair.push_back(d->rho_ipz - rho_ipz_from_rho_iy(d->rho_iy, sel, meas, y));
            }
            const std::size_t skipped = draws.size() - rho.size();
            if (2 * skipped > draws.size())
                throw Error(ErrorKind::Degenerate, "more than half of the replications were degenerate");
            const auto check = [&](const char* name, const std::vector<double>& xs, double expected) {
                const MCEstimate m = summarize(xs, skipped);
                const double z = m.std_error > 0 ? (m.mean - expected) / m.std_error : 0.0;
                const bool ok = std::abs(z) <= 3.0;
                rep.outputs[name] = {{"mc_mean", num(m.mean)},
                                     {"std_error", num(m.std_error)},
                                     {"analytic", num(expected)},
                                     {"z", num(z)},
                                     {"within_3se", ok}};
                if (!ok) rep.flag(std::string(name) + " outside 3 standard errors");
            };
            rep.outputs["identity_max_relative_residual"] = num(worst);
            if (worst > 1e-10) rep.flag("exact identity residual above 1e-10");
            check("rho_iy", rho, rho_model);
            check("rho_ipz", rho_pz, rho_pz_model);
            check("rho_ipz_paired_residual", pair, 0.0);
            check("error_raw", err, expected_estimator_error(sel, meas, y));
            rep.outputs["skipped"] = skipped;
            return emit_json(out_path, rep);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == ErrorKind::Infeasible ? kExitInfeasible : kExitInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalid;
    }
    return kExitOk;
}
