#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gibbsrelax/gibbsrelax.hpp"
#include "json.hpp"

namespace {

using gibbsrelax::invalid_input_error;
using gibbsrelax::size_limit_error;
using json = nlohmann::ordered_json;

// Serializer with a fixed float format so identical runs are byte-identical
// and values round-trip exactly. Non-finite reals become null.
void write_json(std::ostream& os, const json& j) {
  switch (j.type()) {
    case json::value_t::object: {
      os << '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ',';
        first = false;
        os << json(it.key()).dump() << ':';
        write_json(os, it.value());
      }
      os << '}';
      break;
    }
    case json::value_t::array: {
      os << '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << ',';
        write_json(os, j[i]);
      }
      os << ']';
      break;
    }
    case json::value_t::number_float: {
      double v = j.get<double>();
      if (!std::isfinite(v)) {
        os << "null";
        break;
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << buf;
      break;
    }
    default:
      os << j.dump();
  }
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void emit(const json& doc) {
  write_json(std::cout, doc);
  std::cout << "\n";
}

json report_header(const std::string& command, json config) {
  json doc;
  doc["schema_version"] = "1";
  doc["command"] = command;
  doc["config"] = std::move(config);
  return doc;
}

json conditioning_json(const gibbsrelax::ConditioningReport& rep) {
  json j;
  j["set"] = rep.set;
  j["t"] = rep.t;
  j["avg_total_correlation"] = rep.avg_total_correlation;
  j["avg_cov_sq"] = rep.avg_cov_sq;
  j["bound"] = rep.bound;
  j["met_bound"] = rep.met_bound;
  j["mode"] = rep.mode == gibbsrelax::ConditioningMode::sweep ? "sweep" : "greedy";
  j["sampled"] = rep.sampled;
  j["samples"] = rep.samples;
  j["ell"] = rep.ell;
  j["k"] = rep.k;
  return j;
}

json sa_json(const gibbsrelax::SaSolveReport& rep) {
  json j;
  j["upper_bound"] = rep.upper_bound;
  j["objective"] = rep.objective;
  j["entropy_set"] = rep.entropy_set;
  j["duality_gap"] = rep.duality_gap;
  j["eps"] = rep.eps;
  j["fw_iterations"] = rep.fw_iterations;
  j["lp_calls"] = rep.lp_calls;
  j["alternations"] = rep.alternations;
  j["converged"] = rep.converged;
  j["objective_trace"] = rep.objective_trace;
  return j;
}

json rounded_json(const gibbsrelax::RoundedOutput& out) {
  json j;
  j["set"] = out.set;
  j["best"] = out.best;
  j["mixture_value"] = out.mixture_value;
  j["skipped"] = out.skipped;
  json objectives = json::array();
  json weights = json::array();
  for (const auto& c : out.candidates) {
    objectives.push_back(c.objective);
    weights.push_back(c.weight);
  }
  j["candidate_objectives"] = std::move(objectives);
  j["candidate_weights"] = std::move(weights);
  const auto& best = out.candidates[std::size_t(out.best)];
  j["best_assignment"] = json::array();
  for (auto a : best.x_S) j["best_assignment"].push_back(int(a));
  j["best_marginals"] = best.nu.marginals;
  return j;
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Free-energy bounds for Ising models and k-MRFs"};
  app.require_subcommand(1);

  std::string model_path;
  std::uint64_t cap = 0;
  app.add_option("--cap", cap, "Enumeration cap on q^n (overrides GIBBSRELAX_CAP)");

  auto* cmd_exact = app.add_subcommand("exact", "Exact free energy by enumeration");
  cmd_exact->add_option("--model", model_path, "Model JSON file")->required();
  cmd_exact->add_flag("--json", "Emit JSON (default)");

  auto* cmd_validate = app.add_subcommand("validate", "Parse and validate a model file");
  cmd_validate->add_option("--model", model_path, "Model JSON file")->required();
  cmd_validate->add_flag("--json", "Emit JSON (default)");

  int restarts = 50;
  std::uint64_t seed = 0;
  auto* cmd_mf = app.add_subcommand("meanfield", "Mean-field lower bound via multi-restart ascent");
  cmd_mf->add_option("--model", model_path)->required();
  cmd_mf->add_option("--restarts", restarts, "Random restarts")->check(CLI::PositiveNumber);
  cmd_mf->add_option("--seed", seed, "Master seed");
  cmd_mf->add_flag("--json", "Emit JSON (default)");

  int level = 2;
  double eps = 1e-3;
  auto* cmd_sa = app.add_subcommand("sa", "Relaxation upper bound");
  cmd_sa->add_option("--model", model_path)->required();
  cmd_sa->add_option("--level", level, "Entropy-set budget r")->check(CLI::PositiveNumber);
  cmd_sa->add_option("--eps", eps, "Certified duality-gap target")->check(CLI::PositiveNumber);
  cmd_sa->add_flag("--json", "Emit JSON (default)");

  int ell = 2;
  std::string source = "gibbs";
  auto* cmd_round = app.add_subcommand("round", "Correlation rounding to conditional products");
  cmd_round->add_option("--model", model_path)->required();
  cmd_round->add_option("--ell", ell, "Conditioning budget")->check(CLI::NonNegativeNumber);
  cmd_round->add_option("--source", source, "Distribution to round")
      ->check(CLI::IsMember({"gibbs", "sa"}));
  cmd_round->add_option("--level", level, "Relaxation entropy budget (source=sa)");
  cmd_round->add_option("--eps", eps, "Relaxation gap target (source=sa)");
  cmd_round->add_flag("--json", "Emit JSON (default)");

  auto* cmd_pipe = app.add_subcommand("pipeline", "Relax, round, and report both bounds");
  cmd_pipe->add_option("--model", model_path)->required();
  cmd_pipe->add_option("--level", level, "Entropy-set budget r")->check(CLI::PositiveNumber);
  cmd_pipe->add_option("--eps", eps, "Certified duality-gap target")->check(CLI::PositiveNumber);
  cmd_pipe->add_flag("--json", "Emit JSON (default)");

  int sk_n = 16, trials = 10;
  double beta = 1.0;
  std::string noise = "gaussian", method = "exact";
  bool csv = false;
  auto* cmd_sk = app.add_subcommand("sk", "Spin-glass free-energy trials");
  cmd_sk->add_option("--n", sk_n, "Spins")->check(CLI::Range(2, 1000000));
  cmd_sk->add_option("--beta", beta, "Inverse temperature")->check(CLI::NonNegativeNumber);
  cmd_sk->add_option("--trials", trials, "Sample count")->check(CLI::PositiveNumber);
  cmd_sk->add_option("--noise", noise)->check(CLI::IsMember({"gaussian", "rademacher"}));
  cmd_sk->add_option("--method", method)->check(CLI::IsMember({"exact", "sandwich"}));
  cmd_sk->add_option("--level", level, "Relaxation budget (method=sandwich)");
  cmd_sk->add_option("--seed", seed, "Master seed");
  cmd_sk->add_flag("--csv", csv, "Per-trial CSV rows instead of JSON");

  int tmax = 3;
  auto* cmd_kappa = app.add_subcommand("kappa", "Conditional-covariance pinning sweep");
  cmd_kappa->add_option("--model", model_path)->required();
  cmd_kappa->add_option("--tmax", tmax, "Largest conditioning budget")->check(CLI::Range(0, 5));
  cmd_kappa->add_flag("--json", "Emit JSON (default)");

  int sub_s = 0, reps = 0;
  double delta = 0.05;
  std::string inner = "exact";
  auto* cmd_sub = app.add_subcommand("subsample", "Median-of-subsets free-energy estimate");
  cmd_sub->add_option("--model", model_path)->required();
  cmd_sub->add_option("--s", sub_s, "Induced model size")->required()->check(CLI::PositiveNumber);
  cmd_sub->add_option("--reps", reps, "Repetitions (0 picks ceil(48 log(1/delta)))");
  cmd_sub->add_option("--delta", delta, "Failure probability for the default repetition count");
  cmd_sub->add_option("--inner", inner)->check(CLI::IsMember({"exact", "pipeline"}));
  cmd_sub->add_option("--level", level, "Relaxation budget (inner=pipeline)");
  cmd_sub->add_option("--seed", seed, "Master seed");
  cmd_sub->add_flag("--json", "Emit JSON (default)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (cap > 0) gibbsrelax::set_enumeration_cap(cap);
    Timer timer;

    if (cmd_exact->parsed()) {
      gibbsrelax::LoadedModel lm = gibbsrelax::load_model_file(model_path);
      json doc = report_header("exact", {{"model", model_path}});
      doc["free_energy"] = gibbsrelax::exact_free_energy(lm.mrf);
      doc["n"] = lm.mrf.n;
      doc["q"] = lm.mrf.q;
      doc["k"] = lm.mrf.k;
      emit(doc);
    } else if (cmd_validate->parsed()) {
      gibbsrelax::LoadedModel lm = gibbsrelax::load_model_file(model_path);
      json doc = report_header("validate", {{"model", model_path}});
      doc["valid"] = true;
      doc["n"] = lm.mrf.n;
      doc["q"] = lm.mrf.q;
      doc["k"] = lm.mrf.k;
      doc["edges"] = lm.mrf.edges.size();
      doc["ising_form"] = lm.ising.has_value();
      doc["frobenius_norm"] = lm.ising ? gibbsrelax::frobenius_interaction_norm(*lm.ising)
                                       : gibbsrelax::frobenius_interaction_norm(lm.mrf);
      emit(doc);
    } else if (cmd_mf->parsed()) {
      gibbsrelax::LoadedModel lm = gibbsrelax::load_model_file(model_path);
      gibbsrelax::MeanFieldSolution sol = gibbsrelax::mf_optimize(lm.mrf, restarts, seed);
      json doc = report_header(
          "meanfield", {{"model", model_path}, {"restarts", restarts}, {"seed", seed}});
      doc["objective"] = sol.objective;
      doc["converged"] = sol.converged;
      doc["iterations"] = sol.iterations;
      doc["restarts_used"] = sol.restarts_used;
      doc["max_residual"] = sol.max_residual;
      if (lm.mrf.q == 2) doc["means"] = sol.means;
      doc["marginals"] = sol.marginals.marginals;
      emit(doc);
    } else if (cmd_sa->parsed()) {
      gibbsrelax::LoadedModel lm = gibbsrelax::load_model_file(model_path);
      gibbsrelax::SaOptions opt;
      opt.eps = eps;
      gibbsrelax::SaSolveReport rep = gibbsrelax::solve_sa(lm.mrf, level, opt);
      json doc = report_header(
          "sa", {{"model", model_path}, {"level", level}, {"eps", eps}});
      json body = sa_json(rep);
      for (auto& [k, v] : body.items()) doc[k] = v;
      emit(doc);
      std::cerr << "sa: " << fmt(timer.seconds()) << " s\n";
    } else if (cmd_round->parsed()) {
      gibbsrelax::LoadedModel lm = gibbsrelax::load_model_file(model_path);
      json doc = report_header("round", {{"model", model_path},
                                         {"ell", ell},
                                         {"source", source},
                                         {"level", level},
                                         {"eps", eps}});
      gibbsrelax::ConditioningReport cond;
      gibbsrelax::RoundedOutput rounded;
      if (source == "gibbs") {
        gibbsrelax::JointDistribution gibbs = gibbsrelax::exact_gibbs(lm.mrf);
        gibbsrelax::EntropySource src(gibbs);
        cond = gibbsrelax::select_conditioning_set(src, ell, lm.mrf.k);
        if (lm.mrf.q == 2 && lm.mrf.n <= 14)
          cond.avg_cov_sq = gibbsrelax::conditional_covariance_stats(gibbs, cond.set).avg_cov_sq;
        rounded = gibbsrelax::round_to_products(src, cond.set);
      } else {
        gibbsrelax::SaOptions opt;
        opt.eps = eps;
        gibbsrelax::SaSolveReport rep = gibbsrelax::solve_sa(lm.mrf, level, opt);
        doc["sa"] = sa_json(rep);
        gibbsrelax::EntropySource src(rep.family);
        cond = gibbsrelax::select_conditioning_set(src, ell, lm.mrf.k);
        rounded = gibbsrelax::round_to_products(src, cond.set);
      }
      gibbsrelax::best_product(lm.mrf, rounded);
      doc["conditioning"] = conditioning_json(cond);
      doc["rounded"] = rounded_json(rounded);
      doc["lower_bound"] = rounded.candidates[std::size_t(rounded.best)].objective;
      emit(doc);
      std::cerr << "round: " << fmt(timer.seconds()) << " s\n";
    } else if (cmd_pipe->parsed()) {
      gibbsrelax::LoadedModel lm = gibbsrelax::load_model_file(model_path);
      gibbsrelax::PipelineReport rep = gibbsrelax::sa_meanfield(lm.mrf, level, eps);
      json doc = report_header(
          "pipeline", {{"model", model_path}, {"level", level}, {"eps", eps}});
      doc["lower_bound"] = rep.lower_bound;
      doc["upper_bound"] = rep.upper_bound;
      doc["gap"] = rep.upper_bound - rep.lower_bound;
      doc["gap_bound"] = rep.gap_bound;
      doc["upper_gap_bound"] = rep.upper_gap_bound;
      doc["lower_gap_bound"] = rep.lower_gap_bound;
      doc["conditioning"] = conditioning_json(rep.conditioning);
      doc["rounded"] = rounded_json(rep.rounded);
      doc["sa"] = sa_json(rep.sa);
      emit(doc);
      std::cerr << "pipeline: " << fmt(timer.seconds()) << " s\n";
    } else if (cmd_sk->parsed()) {
      gibbsrelax::NoiseKind nk = noise == "gaussian" ? gibbsrelax::NoiseKind::gaussian
                                                     : gibbsrelax::NoiseKind::rademacher;
      gibbsrelax::SkMethod sm = method == "exact" ? gibbsrelax::SkMethod::exact
                                                  : gibbsrelax::SkMethod::sandwich;
      gibbsrelax::SkExperimentResult res =
          gibbsrelax::sk_experiment(sk_n, beta, trials, nk, seed, sm, level);
      if (csv) {
        bool sandwich = sm == gibbsrelax::SkMethod::sandwich;
        std::cout << "trial,f_over_n,mf_over_n,spectral_norm";
        if (sandwich) std::cout << ",lower_over_n,upper_over_n";
        std::cout << "\n";
        for (int t = 0; t < trials; ++t) {
          std::cout << t << ',' << fmt(res.f_over_n[std::size_t(t)]) << ','
                    << fmt(res.mf_over_n[std::size_t(t)]) << ','
                    << fmt(res.spectral_norms[std::size_t(t)]);
          if (sandwich)
            std::cout << ',' << fmt(res.lower_over_n[std::size_t(t)]) << ','
                      << fmt(res.upper_over_n[std::size_t(t)]);
          std::cout << "\n";
        }
      } else {
        json doc = report_header("sk", {{"n", sk_n},
                                        {"beta", beta},
                                        {"trials", trials},
                                        {"noise", noise},
                                        {"method", method},
                                        {"seed", seed}});
        doc["f_over_n"] = res.f_over_n;
        doc["mf_over_n"] = res.mf_over_n;
        doc["spectral_norms"] = res.spectral_norms;
        if (sm == gibbsrelax::SkMethod::sandwich) {
          doc["lower_over_n"] = res.lower_over_n;
          doc["upper_over_n"] = res.upper_over_n;
        }
        doc["mean_f"] = res.mean_f;
        doc["std_f"] = res.std_f;
        doc["mean_mf"] = res.mean_mf;
        doc["std_mf"] = res.std_mf;
        doc["mean_norm"] = res.mean_norm;
        doc["std_norm"] = res.std_norm;
        doc["rs_prediction"] = gibbsrelax::rs_prediction(beta);
        emit(doc);
      }
      std::cerr << "sk: " << fmt(timer.seconds()) << " s\n";
    } else if (cmd_kappa->parsed()) {
      gibbsrelax::LoadedModel lm = gibbsrelax::load_model_file(model_path);
      if (!lm.ising) {
        gibbsrelax::IsingWithOffset iso = gibbsrelax::mrf_to_ising(lm.mrf);
        lm.ising = iso.model;
      }
      gibbsrelax::KappaSweepResult res = gibbsrelax::kappa_sweep(*lm.ising, tmax);
      json doc = report_header("kappa", {{"model", model_path}, {"tmax", tmax}});
      doc["values"] = res.values;
      doc["scaled"] = res.scaled;
      doc["argmin_sets"] = res.argmin_sets;
      emit(doc);
      std::cerr << "kappa: " << fmt(timer.seconds()) << " s\n";
    } else if (cmd_sub->parsed()) {
      gibbsrelax::LoadedModel lm = gibbsrelax::load_model_file(model_path);
      gibbsrelax::SubsampleInner si = inner == "exact" ? gibbsrelax::SubsampleInner::exact
                                                       : gibbsrelax::SubsampleInner::pipeline;
      gibbsrelax::SubsampleEstimate est =
          gibbsrelax::subsample_estimate(lm.mrf, sub_s, reps, delta, seed, si, level);
      json doc = report_header("subsample", {{"model", model_path},
                                             {"s", sub_s},
                                             {"reps", reps},
                                             {"delta", delta},
                                             {"inner", inner},
                                             {"seed", seed}});
      doc["estimate"] = est.estimate;
      doc["repetitions"] = est.repetitions;
      doc["values"] = est.values;
      doc["epsilon_report"] = est.epsilon_report;
      doc["omega"] = est.omega;
      doc["term_frobenius"] = est.term_frobenius;
      doc["term_infinity"] = est.term_infinity;
      doc["term_omega"] = est.term_omega;
      doc["template_value"] = est.template_value;
      emit(doc);
      std::cerr << "subsample: " << fmt(timer.seconds()) << " s\n";
    }
  } catch (const size_limit_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const invalid_input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
