// Command-line front end: `fit`, `predict` and `simulate`.
//
// Exit codes: 0 success, 1 usage or input error, 2 fitting failed.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "vgmix/csv.hpp"
#include "vgmix/vgmix.hpp"

namespace vgmix::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 1;
inline constexpr int exit_fit_failed = 2;

/// Usage and input problems (exit 1).
class UsageError : public Error {
 public:
  using Error::Error;
};

struct FitArgs {
  std::string mode = "cluster";
  std::string input;
  std::optional<std::string> labels;
  std::vector<std::string> exclude;
  std::size_t gmin = 1;
  std::size_t gmax = 4;
  std::optional<std::size_t> G;
  std::optional<std::size_t> H;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t max_iter = 1000;
  double tol = 1e-8;
  std::size_t starts = 5;
  std::string init = "distance";
  bool force = false;
};

struct PredictArgs {
  std::string model;
  std::string input;
  std::optional<std::string> labels;
  std::vector<std::string> exclude;
  std::string out;
};

struct SimulateArgs {
  std::string model;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string out;
};

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path);
  out << text;
  if (!out.flush()) throw UsageError("failed writing " + path);
}

inline VGMixtureModel load_model_file(const std::string& path) {
  try {
    return load_model(read_file(path));
  } catch (const SchemaError& e) {
    throw UsageError(path + ": " + e.what());
  }
}

/// row,label,resp_1..resp_G with 1-based rows and labels.
inline std::string assignments_csv(const Prediction& pred, std::size_t G) {
  std::ostringstream out;
  out << "row,label";
  for (std::size_t g = 1; g <= G; ++g) out << ",resp_" << g;
  out << '\n';
  for (std::size_t i = 0; i < pred.labels.size(); ++i) {
    out << i + 1 << ',' << pred.labels[i] + 1;
    for (double r : pred.responsibilities.row(i)) out << ',' << format_real(r);
    out << '\n';
  }
  return out.str();
}

inline void prepare_out_dir(const std::string& dir, bool force) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::exists(dir, ec)) {
    if (!fs::is_directory(dir, ec)) throw UsageError(dir + " exists and is not a directory");
    if (!fs::is_empty(dir, ec) && !force)
      throw UsageError(dir + " is not empty (use --force to overwrite)");
  } else if (!fs::create_directories(dir, ec) && ec) {
    throw UsageError("cannot create " + dir + ": " + ec.message());
  }
}

inline std::vector<std::optional<std::size_t>> zero_based(const Dataset& ds) {
  std::vector<std::optional<std::size_t>> out(ds.labels.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    if (ds.labels[i]) out[i] = *ds.labels[i] - 1;
  return out;
}

struct TableRow {
  std::size_t G;
  std::optional<FitResult> fit;
  std::string error;
};

inline std::string flag_list(const std::vector<bool>& flags) {
  std::string s;
  for (std::size_t g = 0; g < flags.size(); ++g)
    if (flags[g]) s += (s.empty() ? "" : ",") + std::to_string(g + 1);
  return s.empty() ? "none" : s;
}

struct RunSummary {
  std::size_t G = 0, H = 0;
  double loglik = 0.0, bic = 0.0;
  std::size_t n_iter = 0;
  bool converged = false;
  bool spiked = false;
  std::vector<bool> boundary;
};

inline std::string report(const FitArgs& a, const Dataset& ds, const RunSummary& r,
                          const std::vector<TableRow>& table) {
  std::ostringstream out;
  out << "mode: " << a.mode << '\n'
      << "input: " << a.input << '\n'
      << "seed: " << a.seed << '\n'
      << "n: " << ds.size() << '\n'
      << "p: " << ds.rows.cols() << '\n'
      << "G: " << r.G << '\n'
      << "H: " << r.H << '\n'
      << "loglik: " << format_real(r.loglik) << '\n'
      << "bic: " << format_real(r.bic) << '\n'
      << "iterations: " << r.n_iter << '\n'
      << "converged: " << (r.converged ? "true" : "false") << '\n'
      << "spiked: " << (r.spiked ? "true" : "false") << '\n'
      << "boundary_gamma: " << flag_list(r.boundary) << '\n'
      << "max_iter: " << a.max_iter << '\n'
      << "tol: " << format_real(a.tol) << '\n'
      << "starts: " << a.starts << '\n'
      << "init: " << a.init << '\n'
      << '\n'
      << "   G               loglik                  bic  iterations  converged  spiked\n";
  for (const auto& row : table) {
    char buf[160];
    if (row.fit) {
      std::snprintf(buf, sizeof buf, "%4zu %20.6f %20.6f %11zu  %-9s  %s\n", row.G, row.fit->loglik,
                    row.fit->bic, row.fit->n_iter, row.fit->converged ? "yes" : "no",
                    row.fit->spiked ? "yes" : "no");
      out << buf;
    } else {
      std::snprintf(buf, sizeof buf, "%4zu  failed: ", row.G);
      out << buf << row.error << '\n';
    }
  }
  return out.str();
}

}  // namespace detail

inline int run_fit(const FitArgs& a) {
  if (a.mode != "cluster" && a.mode != "classify" && a.mode != "discriminant")
    throw UsageError("unknown mode " + a.mode);
  if (a.mode != "cluster" && !a.labels) throw UsageError("--mode " + a.mode + " needs --labels");
  if (a.init != "distance" && a.init != "random") throw UsageError("--init must be distance or random");

  EMConfig cfg;
  cfg.seed = a.seed;
  cfg.max_iter = a.max_iter;
  cfg.aitken_eps = a.tol;
  cfg.n_starts = a.starts;
  cfg.init = a.init == "random" ? InitStrategy::random_partition : InitStrategy::distance_based;
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }

  const Dataset ds = ingest_csv(a.input, a.labels, a.exclude);
  if (ds.rows.cols() == 0) throw UsageError(a.input + ": no feature columns");
  const auto labels = detail::zero_based(ds);

  std::optional<VGMixtureModel> model;
  std::vector<detail::TableRow> table;
  detail::RunSummary r;
  auto summarize = [&r](const FitResult& f) {
    r.loglik = f.loglik;
    r.bic = f.bic;
    r.n_iter = f.n_iter;
    r.converged = f.converged;
    r.spiked = f.spiked;
    r.boundary = f.boundary_flags;
  };

  if (a.mode == "cluster") {
    if (a.gmin == 0 || a.gmin > a.gmax) throw UsageError("need 1 <= --gmin <= --gmax");
    detail::prepare_out_dir(a.out, a.force);
    ModelSelection sel = fit_cluster(ds.rows, a.gmin, a.gmax, cfg);
    for (auto& c : sel.candidates) table.push_back({c.G, c.fit, c.error});
    r.G = r.H = sel.best_G();
    model = sel.best().model;
    summarize(sel.best());
  } else if (a.mode == "classify") {
    if (!a.G) throw UsageError("--mode classify needs --G");
    const std::size_t G = *a.G;
    const std::size_t H = a.H.value_or(G);
    if (G == 0 || H < G) throw UsageError("need 1 <= --G <= --H");
    r.G = G;
    r.H = H;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] && *labels[i] >= G)
        throw UsageError("row " + std::to_string(i + 2) + ": label " + std::to_string(*labels[i] + 1) +
                         " exceeds --G " + std::to_string(G));
    detail::prepare_out_dir(a.out, a.force);
    FitResult f = fit_classify(ds.rows, labels, G, H, cfg);
    model = f.model;
    summarize(f);
    table.push_back({H, std::move(f), {}});
  } else {
    std::vector<std::size_t> known(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (!labels[i])
        throw UsageError("discriminant mode needs every row labeled; row " + std::to_string(i + 2) +
                         " is not");
      known[i] = *labels[i];
    }
    detail::prepare_out_dir(a.out, a.force);
    DiscriminantFit d = fit_discriminant(ds.rows, known, cfg);
    model = d.model;
    r.G = r.H = model->size();
    r.loglik = d.loglik;
    r.bic = bic(r.loglik, count_free_params(*model), ds.size());
    r.converged = true;
    for (const auto& c : d.classes) {
      r.n_iter += c.n_iter;
      r.converged = r.converged && c.converged;
      r.spiked = r.spiked || c.spiked;
      r.boundary.push_back(c.boundary_flags.at(0));
    }
    FitResult summary{*model};
    summary.loglik = r.loglik;
    summary.bic = r.bic;
    summary.n_iter = r.n_iter;
    summary.converged = r.converged;
    summary.spiked = r.spiked;
    table.push_back({r.G, std::move(summary), {}});
  }

  namespace fs = std::filesystem;
  const fs::path dir(a.out);
  detail::write_file((dir / "model.json").string(), save_model(*model));
  detail::write_file((dir / "assignments.csv").string(),
                     detail::assignments_csv(predict(*model, ds.rows), model->size()));
  detail::write_file((dir / "report.txt").string(),
                     detail::report(a, ds, r, table));
  return exit_ok;
}

inline int run_predict(const PredictArgs& a) {
  const VGMixtureModel model = detail::load_model_file(a.model);
  const Dataset ds = ingest_csv(a.input, a.labels, a.exclude);
  if (ds.size() > 0 && ds.rows.cols() != model.dim())
    throw UsageError(a.input + " has " + std::to_string(ds.rows.cols()) +
                     " feature columns; the model expects " + std::to_string(model.dim()));
  detail::write_file(a.out, detail::assignments_csv(predict(model, ds.rows), model.size()));
  return exit_ok;
}

inline int run_simulate(const SimulateArgs& a) {
  const VGMixtureModel model = detail::load_model_file(a.model);
  Rng rng(a.seed);
  SimulatedData sim = sample_mixture(model, a.n, rng);
  Dataset ds;
  for (std::size_t j = 1; j <= model.dim(); ++j) ds.column_names.push_back("x" + std::to_string(j));
  ds.rows = std::move(sim.data);
  ds.label_name = "true_label";
  for (std::size_t l : sim.labels) ds.labels.emplace_back(l + 1);
  std::ostringstream out;
  write_csv(out, ds);
  detail::write_file(a.out, out.str());
  return exit_ok;
}

/// Maps exceptions onto the exit-code contract, reporting to `err`.
template <class F>
int guarded(F&& body, std::ostream& err) {
  try {
    return body();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const CsvError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const DimensionMismatch& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const TooFewObservations& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const Error& e) {
    err << "fit failed: " << e.what() << '\n';
    return exit_fit_failed;
  } catch (const std::exception& e) {
    err << "fit failed: " << e.what() << '\n';
    return exit_fit_failed;
  }
}

inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"Mixtures of variance-gamma distributions: clustering, classification, discriminant analysis"};
  app.require_subcommand(1);

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit a mixture and write model.json, assignments.csv, report.txt");
  fit->add_option("--mode", fa.mode, "cluster | classify | discriminant")
      ->check(CLI::IsMember({"cluster", "classify", "discriminant"}))
      ->capture_default_str();
  fit->add_option("--input", fa.input, "Input CSV with a header row")->required();
  fit->add_option("--labels", fa.labels, "Label column (positive integers; blank = unlabeled)");
  fit->add_option("--exclude", fa.exclude, "Columns to ignore (repeatable)");
  fit->add_option("--gmin", fa.gmin, "Smallest G tried in cluster mode")->capture_default_str();
  fit->add_option("--gmax", fa.gmax, "Largest G tried in cluster mode")->capture_default_str();
  fit->add_option("--G", fa.G, "Number of labeled classes (classify)");
  fit->add_option("--H", fa.H, "Total components, H >= G (classify; default G)");
  fit->add_option("--out", fa.out, "Output directory (must be new or empty)")->required();
  fit->add_option("--seed", fa.seed, "Random seed; all randomness derives from it")->capture_default_str();
  fit->add_option("--max-iter", fa.max_iter, "EM iteration cap")->capture_default_str();
  fit->add_option("--tol", fa.tol, "Aitken stopping tolerance")->capture_default_str();
  fit->add_option("--starts", fa.starts, "Random restarts per G")->capture_default_str();
  fit->add_option("--init", fa.init, "distance | random")
      ->check(CLI::IsMember({"distance", "random"}))
      ->capture_default_str();
  fit->add_flag("--force", fa.force, "Allow a non-empty output directory");

  PredictArgs pa;
  auto* pred = app.add_subcommand("predict", "Classify rows with a saved model");
  pred->add_option("--model", pa.model, "model.json from fit")->required();
  pred->add_option("--input", pa.input, "Input CSV")->required();
  pred->add_option("--labels", pa.labels, "Label column to ignore");
  pred->add_option("--exclude", pa.exclude, "Columns to ignore (repeatable)");
  pred->add_option("--out", pa.out, "Assignments CSV to write")->required();

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Draw a labeled sample from a saved model");
  sim->add_option("--model", sa.model, "Model document")->required();
  sim->add_option("--n", sa.n, "Number of rows")->required();
  sim->add_option("--seed", sa.seed, "Random seed")->capture_default_str();
  sim->add_option("--out", sa.out, "CSV to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e) == 0 ? exit_ok : exit_usage;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e) == 0 ? exit_ok : exit_usage;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << "run with --help for usage\n";
    return exit_usage;
  }

  if (fit->parsed()) return guarded([&] { return run_fit(fa); }, err);
  if (pred->parsed()) return guarded([&] { return run_predict(pa); }, err);
  return guarded([&] { return run_simulate(sa); }, err);
}

}  // namespace vgmix::cli
