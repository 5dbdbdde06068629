// trapclust: subgraph detection and graph partitioning by mean exit time.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "trapclust/detector.hpp"
#include "trapclust/energy.hpp"
#include "trapclust/errors.hpp"
#include "trapclust/eval.hpp"
#include "trapclust/execution.hpp"
#include "trapclust/graph.hpp"
#include "trapclust/log.hpp"
#include "trapclust/partitioner.hpp"
#include "trapclust/poisson.hpp"
#include "trapclust/sweep.hpp"
#include "trapclust/synth.hpp"

namespace tc = trapclust;
using json = nlohmann::ordered_json;

namespace {

struct GraphInput {
  std::string path;
  bool symmetrize = false;
  double self_loop = 0.0;

  void add(CLI::App* app) {
    app->add_option("--graph", path, "Edge list or MatrixMarket file")->required();
    app->add_flag("--symmetrize", symmetrize, "Replace A by (A + A^T)/2");
    app->add_option("--self-loop", self_loop, "Add a self-loop of this weight to every node");
  }
  tc::Graph load() const {
    tc::LoadOptions opts;
    opts.symmetrize = symmetrize;
    opts.self_loop_weight = self_loop;
    return tc::load_graph(path, opts);
  }
};

tc::SolverKind parse_solver(const std::string& s) {
  if (s == "auto") return tc::SolverKind::kAuto;
  if (s == "direct") return tc::SolverKind::kDirect;
  if (s == "iterative") return tc::SolverKind::kIterative;
  throw tc::ValidationError("unknown solver '" + s + "'");
}

// Writes to --out when given, stdout otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw tc::ValidationError("cannot open '" + path + "' for writing");
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

json names_of(const tc::Graph& g, const tc::NodeSet& set) {
  json out = json::array();
  for (tc::NodeIndex i : set) out.push_back(g.name(i));
  return out;
}

// A random fraction of the labeled nodes, deterministic in the seed.
std::vector<std::optional<int>> subsample_labels(const std::vector<std::optional<int>>& labels,
                                                 double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw tc::ValidationError("supervision fraction must lie in [0, 1]");
  }
  std::vector<tc::NodeIndex> labeled;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) labeled.push_back(static_cast<tc::NodeIndex>(i));
  }
  const auto keep = static_cast<tc::NodeIndex>(std::llround(fraction * labeled.size()));
  tc::Rng rng = tc::make_rng(seed, 0x55);
  const tc::NodeSet chosen = tc::random_subset(static_cast<tc::NodeIndex>(labeled.size()), keep, rng);
  std::vector<std::optional<int>> out(labels.size());
  for (tc::NodeIndex c : chosen) out[labeled[c]] = labels[labeled[c]];
  return out;
}

tc::DetectorSupervision detector_supervision(const std::vector<std::optional<int>>& labels,
                                             int target, double lambda) {
  tc::DetectorSupervision sup;
  sup.lambda = lambda;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) continue;
    (*labels[i] == target ? sup.inside : sup.outside).push_back(static_cast<tc::NodeIndex>(i));
  }
  return sup;
}

int smallest_class(const tc::NodeLabels& labels) {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(labels.num_classes()), 0);
  for (const auto& l : labels.label) {
    if (l) ++sizes[*l];
  }
  int best = 0;
  for (int c = 1; c < labels.num_classes(); ++c) {
    if (sizes[c] < sizes[best]) best = c;
  }
  return best;
}

int class_index(const tc::NodeLabels& labels, const std::string& name) {
  for (int c = 0; c < labels.num_classes(); ++c) {
    if (labels.class_names[c] == name) return c;
  }
  throw tc::ValidationError("class '" + name + "' does not appear in the label file");
}

tc::NodeSet class_members(const std::vector<std::optional<int>>& labels, int c) {
  tc::NodeSet out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == c) out.push_back(static_cast<tc::NodeIndex>(i));
  }
  return out;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string family = "mickee";
  std::string spec_path;
  std::optional<std::uint64_t> seed;
  std::string prefix;
};

tc::PlantedGraph generate_family(const std::string& family, const tc::SpecEntries& entries,
                                 std::uint64_t seed) {
  if (family == "er-cycle") {
    tc::ErCycleSpec spec = tc::er_cycle_spec_from(entries);
    spec.seed = seed;
    return tc::generate_er_cycle(spec);
  }
  tc::MickeeSpec spec = tc::mickee_spec_from(entries);
  spec.seed = seed;
  if (family == "mickee") return tc::generate_mickee(spec);
  if (family == "powerlaw-mickee") {
    if (!spec.powerlaw_exponent) spec.powerlaw_exponent = 2.5;
    return tc::generate_powerlaw_mickee(spec);
  }
  throw tc::ValidationError("unknown family '" + family + "'");
}

tc::SpecEntries read_spec_file(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw tc::ValidationError("cannot open spec file '" + path + "'");
  return tc::read_spec_entries(in);
}

int run_generate(const GenerateArgs& a) {
  tc::SpecEntries entries = read_spec_file(a.spec_path);
  std::uint64_t seed = 0;
  if (a.seed) {
    seed = *a.seed;
  } else if (auto it = entries.find("seed"); it != entries.end()) {
    seed = std::stoull(it->second);
  }
  entries.erase("seed");
  const tc::PlantedGraph pg = generate_family(a.family, entries, seed);

  const std::string edges_path = a.prefix + ".edges";
  const std::string labels_path = a.prefix + ".labels";
  {
    std::ofstream out(edges_path);
    if (!out) throw tc::ValidationError("cannot write '" + edges_path + "'");
    tc::save_edge_list(pg.graph, out);
  }
  {
    std::ofstream out(labels_path);
    if (!out) throw tc::ValidationError("cannot write '" + labels_path + "'");
    tc::save_labels(pg.graph, pg.labels, out);
  }
  json rec;
  rec["family"] = a.family;
  rec["seed"] = seed;
  rec["nodes"] = pg.graph.size();
  rec["edges"] = pg.graph.num_edges();
  rec["attempts"] = pg.attempts;
  rec["edge_file"] = edges_path;
  rec["label_file"] = labels_path;
  std::cout << rec.dump(2) << "\n";
  return 0;
}

// ------------------------------------------------------------------ detect

struct DetectArgs {
  GraphInput graph;
  tc::NodeIndex k = 0;
  double C = 50.0;
  std::optional<double> epsilon;
  int restarts = 5;
  int max_iters = 100;
  std::uint64_t seed = 0;
  std::string labels;
  std::string target_class;
  double lambda = 0.0;
  double supervision_frac = 1.0;
  std::string solver = "auto";
  std::string out;
};

int run_detect(const DetectArgs& a) {
  const tc::Graph g = a.graph.load();
  const tc::PoissonContext ctx(g);
  tc::DetectorConfig cfg;
  cfg.k = a.k;
  cfg.epsilon_scale = a.C;
  cfg.epsilon = a.epsilon;
  cfg.restarts = a.restarts;
  cfg.max_iters = a.max_iters;
  cfg.seed = a.seed;
  cfg.solver.kind = parse_solver(a.solver);

  std::optional<tc::NodeLabels> labels;
  int target = 0;
  if (!a.labels.empty()) {
    labels = tc::load_labels(a.labels, g);
    target = a.target_class.empty() ? smallest_class(*labels) : class_index(*labels, a.target_class);
    if (a.lambda > 0.0) {
      cfg.supervision = detector_supervision(
          subsample_labels(labels->label, a.supervision_frac, a.seed), target, a.lambda);
    }
  } else if (a.lambda > 0.0) {
    throw tc::ValidationError("--lambda needs --labels");
  }

  const tc::DetectorResult res = tc::detect(ctx, cfg);
  json rec;
  rec["k"] = cfg.k;
  rec["set"] = names_of(g, res.set);
  rec["tau"] = res.exact_met;
  rec["energy"] = res.energy;
  rec["epsilon"] = res.epsilon;
  rec["iterations"] = res.iterations;
  rec["converged"] = res.converged;
  rec["best_restart"] = res.best_restart;
  rec["restart_energies"] = res.restart_energies;
  rec["trace"] = res.energy_trace;
  if (labels) {
    rec["target_class"] = labels->class_names[target];
    rec["accuracy"] = tc::subgraph_accuracy(res.set, class_members(labels->label, target));
  }
  Output out(a.out);
  out.stream() << rec.dump(2) << "\n";
  return 0;
}

// --------------------------------------------------------------- partition

struct PartitionArgs {
  GraphInput graph;
  int K = 2;
  double C = 50.0;
  double nu = 1.0;
  std::optional<double> epsilon;
  std::string init = "random";
  int restarts = 5;
  int max_iters = 100;
  std::uint64_t seed = 0;
  std::string labels;
  double lambda = 0.0;
  double supervision_frac = 1.0;
  bool reseed_empty = false;
  std::string solver = "auto";
  std::string out;
  std::string labels_out;
};

tc::PartitionInit parse_init(const std::string& s) {
  if (s == "random") return tc::PartitionInit::kRandom;
  if (s == "spectral") return tc::PartitionInit::kSpectral;
  throw tc::ValidationError("unknown init '" + s + "'");
}

int run_partition(const PartitionArgs& a) {
  const tc::Graph g = a.graph.load();
  const tc::PoissonContext ctx(g);
  tc::PartitionerConfig cfg;
  cfg.K = a.K;
  cfg.epsilon_scale = a.C;
  cfg.nu = a.nu;
  cfg.epsilon = a.epsilon;
  cfg.init = parse_init(a.init);
  cfg.restarts = a.restarts;
  cfg.max_iters = a.max_iters;
  cfg.seed = a.seed;
  cfg.reseed_empty = a.reseed_empty;
  cfg.solver.kind = parse_solver(a.solver);

  std::optional<std::vector<std::optional<int>>> metadata;
  if (!a.labels.empty()) {
    const tc::NodeLabels labels = tc::load_labels(a.labels, g);
    metadata = labels.label;
    if (a.lambda > 0.0) {
      cfg.supervision = tc::PartitionSupervision{
          subsample_labels(labels.label, a.supervision_frac, a.seed), a.lambda};
    }
  } else if (a.lambda > 0.0) {
    throw tc::ValidationError("--lambda needs --labels");
  }

  const tc::Partition p = a.lambda > 0.0 ? tc::partition_ssl(ctx, cfg, metadata)
                                         : tc::partition(ctx, cfg, metadata);
  if (!a.labels_out.empty()) {
    std::ofstream out(a.labels_out);
    if (!out) throw tc::ValidationError("cannot write '" + a.labels_out + "'");
    tc::save_labels(g, p.labels, out);
  }
  json rec;
  rec["K"] = cfg.K;
  rec["epsilon"] = p.epsilon;
  rec["energy"] = p.energy;
  rec["class_energies"] = p.class_energies;
  rec["iterations"] = p.iterations;
  rec["converged"] = p.converged;
  rec["nonempty_classes"] = p.nonempty_classes;
  rec["degenerate"] = p.degenerate;
  rec["best_restart"] = p.best_restart;
  rec["restart_energies"] = p.restart_energies;
  rec["trace"] = p.energy_trace;
  if (p.purity) rec["purity"] = *p.purity;
  if (a.labels_out.empty()) {
    json labels = json::object();
    for (tc::NodeIndex i = 0; i < g.size(); ++i) labels[g.name(i)] = p.labels[i];
    rec["labels"] = labels;
  }
  Output out(a.out);
  out.stream() << rec.dump(2) << "\n";
  return 0;
}

// ------------------------------------------------------------------- sweep

struct Axis {
  std::string name;
  std::vector<double> values;
};

// "name=start:stop:step" or "name=v1,v2,..." axes separated by ';'.
std::vector<Axis> parse_grid(const std::string& spec) {
  std::vector<Axis> axes;
  std::stringstream ss(spec);
  for (std::string part; std::getline(ss, part, ';');) {
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw tc::ValidationError("grid axis '" + part + "' must look like name=a:b:step or name=v1,v2");
    }
    Axis axis{part.substr(0, eq), {}};
    const std::string body = part.substr(eq + 1);
    auto number = [&](const std::string& s) {
      try {
        std::size_t used = 0;
        const double x = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return x;
      } catch (const std::exception&) {
        throw tc::ValidationError("grid axis '" + axis.name + "': bad number '" + s + "'");
      }
    };
    if (body.find(':') != std::string::npos) {
      std::vector<double> parts;
      std::stringstream bs(body);
      for (std::string tok; std::getline(bs, tok, ':');) parts.push_back(number(tok));
      if (parts.size() != 3) throw tc::ValidationError("range axis needs start:stop:step");
      axis.values = tc::arithmetic_grid(parts[0], parts[1], parts[2]);
    } else {
      std::stringstream bs(body);
      for (std::string tok; std::getline(bs, tok, ',');) axis.values.push_back(number(tok));
    }
    if (axis.values.empty()) throw tc::ValidationError("grid axis '" + axis.name + "' is empty");
    for (const auto& other : axes) {
      if (other.name == axis.name) throw tc::ValidationError("duplicate grid axis '" + axis.name + "'");
    }
    axes.push_back(std::move(axis));
  }
  if (axes.empty()) throw tc::ValidationError("empty grid");
  return axes;
}

std::vector<std::vector<double>> grid_points(const std::vector<Axis>& axes) {
  std::vector<std::vector<double>> points{{}};
  for (const auto& axis : axes) {
    std::vector<std::vector<double>> next;
    for (const auto& p : points) {
      for (double v : axis.values) {
        auto q = p;
        q.push_back(v);
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  return points;
}

// Axes that set algorithm parameters; every other axis name is a generator
// spec key.
bool is_algorithm_axis(const std::string& name) {
  return name == "k" || name == "K" || name == "ell" || name == "nu" || name == "C" ||
         name == "frac" || name == "lambda";
}

struct SweepArgs {
  std::string kind;
  std::string grid;
  std::string graph_path;
  bool symmetrize = false;
  std::string labels;
  std::string family;
  std::string spec_path;
  std::string task;
  int seeds = 1;
  std::uint64_t seed = 0;
  std::optional<tc::NodeIndex> k;
  int K = 0;
  double C = 50.0;
  double nu = 1.0;
  double lambda = 1e6;
  double frac = 0.1;
  std::string init = "random";
  int restarts = 5;
  int max_iters = 100;
  std::string solver = "auto";
  std::string out;
  bool resume = false;
  bool no_wall_time = false;
};

struct Instance {
  tc::Graph graph;
  std::vector<std::optional<int>> metadata;
  // Target for detection accuracy.
  tc::NodeSet target;
  int classes = 0;
};

class InstanceCache {
 public:
  explicit InstanceCache(const SweepArgs& a) : args_(a) {
    if (!a.graph_path.empty()) {
      tc::LoadOptions opts;
      opts.symmetrize = a.symmetrize;
      auto inst = std::make_shared<Instance>();
      inst->graph = tc::load_graph(a.graph_path, opts);
      if (!a.labels.empty()) {
        const tc::NodeLabels labels = tc::load_labels(a.labels, inst->graph);
        inst->metadata = labels.label;
        inst->classes = labels.num_classes();
        inst->target = class_members(labels.label, smallest_class(labels));
      } else {
        inst->metadata.assign(static_cast<std::size_t>(inst->graph.size()), std::nullopt);
      }
      fixed_ = std::move(inst);
    } else {
      base_ = read_spec_file(a.spec_path);
      base_.erase("seed");
    }
  }

  std::shared_ptr<const Instance> get(const std::map<std::string, double>& overrides,
                                      std::uint64_t seed) {
    if (fixed_) return fixed_;
    tc::SpecEntries entries = base_;
    std::string key = std::to_string(seed);
    for (const auto& [name, value] : overrides) {
      entries[name] = tc::format_number(value);
      key += ";" + name + "=" + entries[name];
    }
    {
      std::lock_guard lock(mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    const tc::PlantedGraph pg = generate_family(args_.family, entries, seed);
    auto inst = std::make_shared<Instance>();
    inst->graph = pg.graph;
    inst->metadata.assign(pg.labels.begin(), pg.labels.end());
    inst->classes = *std::max_element(pg.labels.begin(), pg.labels.end()) + 1;
    // ER+cycle: the cycle (label 1); MICKEE: the smallest planted block (label 0).
    inst->target = pg.group(args_.family == "er-cycle" ? 1 : 0);
    std::lock_guard lock(mutex_);
    cache_.emplace(key, inst);
    return inst;
  }

 private:
  const SweepArgs& args_;
  std::shared_ptr<const Instance> fixed_;
  tc::SpecEntries base_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const Instance>> cache_;
};

std::vector<tc::Cell> sweep_row(const SweepArgs& a, InstanceCache& cache,
                                const std::vector<Axis>& axes, const std::vector<double>& point,
                                std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  std::map<std::string, double> algo, spec;
  for (std::size_t i = 0; i < axes.size(); ++i) {
    (is_algorithm_axis(axes[i].name) ? algo : spec)[axes[i].name] = point[i];
  }
  auto param = [&](const char* name, double fallback) {
    auto it = algo.find(name);
    return it == algo.end() ? fallback : it->second;
  };
  const auto inst = cache.get(spec, seed);
  const tc::PoissonContext ctx(inst->graph);
  const double nu = algo.count("ell") ? std::exp(0.2 * algo["ell"]) : param("nu", a.nu);
  const double C = param("C", a.C);
  const double lambda = param("lambda", a.lambda);
  const double frac = param("frac", a.frac);

  double metric = std::numeric_limits<double>::quiet_NaN();
  double tau = std::numeric_limits<double>::quiet_NaN();
  double energy = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string status = "ok";

  try {
    if (a.task == "detect") {
      tc::DetectorConfig cfg;
      const double k = param("k", a.k ? *a.k : static_cast<double>(inst->target.size()));
      if (k != std::floor(k)) throw tc::ValidationError("k must be an integer");
      cfg.k = static_cast<tc::NodeIndex>(k);
      cfg.epsilon_scale = C * nu;
      cfg.restarts = a.restarts;
      cfg.max_iters = a.max_iters;
      cfg.seed = seed;
      cfg.solver.kind = parse_solver(a.solver);
      cfg.execution = tc::Execution::kSerial;
      if (a.kind == "supervision" && lambda > 0.0) {
        std::vector<std::optional<int>> target_labels(inst->metadata.size());
        const auto in_target = tc::membership(inst->graph.size(), inst->target);
        for (std::size_t i = 0; i < target_labels.size(); ++i) {
          if (inst->metadata[i]) target_labels[i] = in_target[i] ? 1 : 0;
        }
        cfg.supervision = detector_supervision(subsample_labels(target_labels, frac, seed), 1, lambda);
      }
      const tc::DetectorResult r = tc::detect(ctx, cfg);
      if (!inst->target.empty()) metric = tc::subgraph_accuracy(r.set, inst->target);
      tau = r.exact_met;
      energy = r.energy;
      iterations = r.iterations;
      converged = r.converged;
    } else {
      tc::PartitionerConfig cfg;
      const double K = param("K", a.K > 0 ? a.K : inst->classes);
      if (K < 1 || K != std::floor(K)) throw tc::ValidationError("partition sweeps need --K");
      cfg.K = static_cast<int>(K);
      cfg.epsilon_scale = C;
      cfg.nu = nu;
      cfg.init = parse_init(a.init);
      cfg.restarts = a.restarts;
      cfg.max_iters = a.max_iters;
      cfg.seed = seed;
      cfg.solver.kind = parse_solver(a.solver);
      cfg.execution = tc::Execution::kSerial;
      if (a.kind == "supervision" && lambda > 0.0) {
        cfg.supervision = tc::PartitionSupervision{subsample_labels(inst->metadata, frac, seed), lambda};
      }
      const bool has_meta = std::any_of(inst->metadata.begin(), inst->metadata.end(),
                                        [](const auto& l) { return l.has_value(); });
      std::optional<std::vector<std::optional<int>>> meta;
      if (has_meta) meta = inst->metadata;
      const tc::Partition p = tc::partition(ctx, cfg, meta);
      if (p.purity) metric = *p.purity;
      energy = p.energy;
      iterations = p.iterations;
      converged = p.converged;
    }
  } catch (const tc::SolverError& e) {
    // Extreme grid points (eps far above the graph scale) can make the shifted
    // Laplacian numerically singular; keep the row and move on.
    std::ostringstream where;
    for (std::size_t i = 0; i < axes.size(); ++i) where << axes[i].name << "=" << point[i] << " ";
    tc::warn("sweep point " + where.str() + "seed=" + std::to_string(seed) + ": " + e.what());
    metric = tau = energy = std::numeric_limits<double>::quiet_NaN();
    iterations = 0;
    converged = false;
    status = "solver_error";
  }

  std::vector<tc::Cell> row;
  for (double v : point) row.emplace_back(v);
  row.emplace_back(static_cast<std::int64_t>(seed));
  row.emplace_back(metric);
  row.emplace_back(tau);
  row.emplace_back(energy);
  row.emplace_back(static_cast<std::int64_t>(iterations));
  row.emplace_back(static_cast<std::int64_t>(converged ? 1 : 0));
  row.emplace_back(status);
  if (a.no_wall_time) {
    row.emplace_back(std::string("NA"));
  } else {
    row.emplace_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                         .count());
  }
  return row;
}

void apply_kind_defaults(SweepArgs& a, const std::vector<Axis>& axes) {
  auto has_axis = [&](const char* name) {
    return std::any_of(axes.begin(), axes.end(), [&](const Axis& x) { return x.name == name; });
  };
  if (a.kind == "k") {
    if (!has_axis("k")) throw tc::ValidationError("--kind k needs a 'k' grid axis");
    if (a.task.empty()) a.task = "detect";
  } else if (a.kind == "epsilon") {
    if (!has_axis("ell") && !has_axis("nu")) {
      throw tc::ValidationError("--kind epsilon needs an 'ell' or 'nu' grid axis");
    }
    if (a.task.empty()) a.task = "partition";
  } else if (a.kind == "noise") {
    if (a.task.empty()) a.task = "detect";
  } else if (a.kind == "powerlaw") {
    if (a.family.empty()) a.family = "powerlaw-mickee";
    if (a.family != "powerlaw-mickee") {
      throw tc::ValidationError("--kind powerlaw uses the powerlaw-mickee family");
    }
    if (a.task.empty()) a.task = "detect";
  } else if (a.kind == "supervision") {
    if (!has_axis("frac")) throw tc::ValidationError("--kind supervision needs a 'frac' grid axis");
    if (a.task.empty()) a.task = "partition";
  } else {
    throw tc::ValidationError("unknown sweep kind '" + a.kind + "'");
  }
  if (a.family.empty()) a.family = "mickee";
  if (a.task != "detect" && a.task != "partition") {
    throw tc::ValidationError("--task must be detect or partition");
  }
  const bool spec_axes = std::any_of(axes.begin(), axes.end(),
                                     [](const Axis& x) { return !is_algorithm_axis(x.name); });
  if (!a.graph_path.empty() && spec_axes) {
    throw tc::ValidationError("generator grid axes cannot be combined with --graph");
  }
  if (a.seeds < 1) throw tc::ValidationError("--seeds must be >= 1");
}

int run_sweep(SweepArgs a) {
  const std::vector<Axis> axes = parse_grid(a.grid);
  apply_kind_defaults(a, axes);

  std::vector<std::string> columns;
  for (const auto& axis : axes) columns.push_back(axis.name);
  for (const char* c : {"seed", a.task == "detect" ? "accuracy" : "purity", "tau", "energy",
                        "iterations", "converged", "status", "wall_ms"}) {
    columns.emplace_back(c);
  }

  const auto points = grid_points(axes);
  struct Job {
    std::size_t point;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (int s = 0; s < a.seeds; ++s) {
    for (std::size_t p = 0; p < points.size(); ++p) jobs.push_back({p, a.seed + static_cast<std::uint64_t>(s)});
  }

  std::size_t done = 0;
  std::ofstream file;
  if (a.resume) {
    if (a.out.empty()) throw tc::ValidationError("--resume needs --out");
    std::ifstream in(a.out);
    if (in) {
      const tc::CsvTable existing = tc::read_csv(in);
      if (existing.header != columns) {
        throw tc::ValidationError("cannot resume: '" + a.out + "' has a different header");
      }
      done = existing.rows.size();
      if (done > jobs.size()) throw tc::ValidationError("cannot resume: more rows than grid points");
    }
  }
  if (!a.out.empty()) {
    file.open(a.out, done > 0 ? std::ios::app : std::ios::trunc);
    if (!file) throw tc::ValidationError("cannot open '" + a.out + "' for writing");
  }
  std::ostream& out = a.out.empty() ? std::cout : file;
  if (done == 0) tc::write_csv_header(columns, out);
  out.flush();

  InstanceCache cache(a);
  // Rows are computed in parallel chunks and written in grid order, so a
  // partial file always holds a prefix of the full table.
  const auto chunk = static_cast<std::size_t>(std::max(1, tc::max_threads()));
  for (std::size_t begin = done; begin < jobs.size(); begin += chunk) {
    const std::size_t end = std::min(jobs.size(), begin + chunk);
    std::vector<std::vector<tc::Cell>> rows(end - begin);
    tc::for_each_index(static_cast<std::int64_t>(end - begin), tc::Execution::kParallel,
                       [&](std::int64_t i) {
                         const Job& job = jobs[begin + i];
                         rows[i] = sweep_row(a, cache, axes, points[job.point], job.seed);
                       });
    for (const auto& row : rows) tc::write_csv_row(row, out);
    out.flush();
  }
  return 0;
}

// --------------------------------------------------------------------- met

struct MetArgs {
  GraphInput graph;
  std::string set_path;
  std::optional<std::int64_t> walks;
  std::int64_t step_cap = 10'000'000;
  std::uint64_t seed = 0;
  std::string out;
};

int run_met(const MetArgs& a) {
  const tc::Graph g = a.graph.load();
  std::ifstream in(a.set_path);
  if (!in) throw tc::ValidationError("cannot open set file '" + a.set_path + "'");
  const tc::NodeSet set = tc::load_node_set(in, g);
  const tc::ExitTimes exact = tc::solve_exact_met(g, set);
  json rec;
  rec["set"] = names_of(g, set);
  rec["tau"] = exact.tau;
  if (a.walks) {
    tc::MonteCarloOptions opts;
    opts.walks_per_node = *a.walks;
    opts.step_cap = a.step_cap;
    opts.seed = a.seed;
    const tc::MonteCarloEstimate mc = tc::monte_carlo_met(g, set, opts);
    rec["monte_carlo"] = {{"walks_per_node", *a.walks},
                          {"tau_hat", mc.tau_hat},
                          {"stderr", mc.std_error},
                          {"total_steps", mc.total_steps}};
  }
  Output out(a.out);
  out.stream() << rec.dump(2) << "\n";
  return 0;
}

// ------------------------------------------------------------------ oracle

struct OracleArgs {
  GraphInput graph;
  std::optional<tc::NodeIndex> best_subgraph;
  std::optional<int> best_partition;
  double C = 50.0;
  std::optional<double> epsilon;
  std::string out;
};

int run_oracle(const OracleArgs& a) {
  const tc::Graph g = a.graph.load();
  json rec;
  if (a.best_subgraph) {
    const tc::BestSubgraph best = tc::brute_force_best_subgraph(g, *a.best_subgraph);
    rec["k"] = *a.best_subgraph;
    rec["set"] = names_of(g, best.set);
    rec["tau"] = best.tau;
    rec["evaluated"] = best.evaluated;
  } else {
    const double eps = a.epsilon ? *a.epsilon : a.C / tc::laplacian_frobenius(g);
    const tc::BestPartition best = tc::brute_force_best_partition(g, *a.best_partition, eps);
    rec["K"] = *a.best_partition;
    rec["epsilon"] = eps;
    rec["energy"] = best.energy;
    rec["evaluated"] = best.evaluated;
    json labels = json::object();
    for (tc::NodeIndex i = 0; i < g.size(); ++i) labels[g.name(i)] = best.labels[i];
    rec["labels"] = labels;
  }
  Output out(a.out);
  out.stream() << rec.dump(2) << "\n";
  return 0;
}

int default_jobs() {
  if (const char* env = std::getenv("TRAPCLUST_JOBS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
    tc::warn("ignoring invalid TRAPCLUST_JOBS='" + std::string(env) + "'");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subgraph detection and graph partitioning by mean exit time"};
  app.require_subcommand(1);
  int jobs = default_jobs();
  app.add_option("--jobs,-j", jobs,
                 "Concurrent restarts/grid points (default: TRAPCLUST_JOBS or all cores)");

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Sample a synthetic graph with planted groups");
  generate->add_option("--family", gen.family, "mickee | powerlaw-mickee | er-cycle")
      ->check(CLI::IsMember({"mickee", "powerlaw-mickee", "er-cycle"}));
  generate->add_option("--spec", gen.spec_path, "key=value generator spec file");
  generate->add_option("--seed", gen.seed, "Overrides the spec seed");
  generate->add_option("--out-prefix", gen.prefix, "Writes PREFIX.edges and PREFIX.labels")->required();

  DetectArgs det;
  auto* detect = app.add_subcommand("detect", "Find k nodes with maximal mean exit time");
  det.graph.add(detect);
  detect->add_option("--k", det.k, "Target set size")->required();
  detect->add_option("--C", det.C, "eps = C / ||L||_F");
  detect->add_option("--epsilon", det.epsilon, "Explicit eps (overrides --C)");
  detect->add_option("--restarts", det.restarts);
  detect->add_option("--max-iters", det.max_iters);
  detect->add_option("--seed", det.seed);
  detect->add_option("--labels", det.labels, "node label file (accuracy, supervision)");
  detect->add_option("--target-class", det.target_class, "Label of the sought group (default: smallest)");
  detect->add_option("--lambda", det.lambda, "Supervision weight");
  detect->add_option("--supervision-frac", det.supervision_frac, "Fraction of labels revealed");
  detect->add_option("--solver", det.solver, "auto | direct | iterative");
  detect->add_option("--out", det.out, "Write the JSON record here instead of stdout");

  PartitionArgs par;
  auto* part = app.add_subcommand("partition", "Split the graph into K groups of slow escape");
  par.graph.add(part);
  part->add_option("--K", par.K, "Number of classes")->required();
  part->add_option("--C", par.C, "eps = C nu / ||L||_F");
  part->add_option("--nu", par.nu);
  part->add_option("--epsilon", par.epsilon, "Explicit eps (overrides --C and --nu)");
  part->add_option("--init", par.init, "random | spectral")
      ->check(CLI::IsMember({"random", "spectral"}));
  part->add_option("--restarts", par.restarts);
  part->add_option("--max-iters", par.max_iters);
  part->add_option("--seed", par.seed);
  part->add_option("--labels", par.labels, "node label file (purity, supervision)");
  part->add_option("--lambda", par.lambda, "Supervision weight");
  part->add_option("--supervision-frac", par.supervision_frac, "Fraction of labels revealed");
  part->add_flag("--reseed-empty", par.reseed_empty, "Refill classes that become empty");
  part->add_option("--solver", par.solver, "auto | direct | iterative");
  part->add_option("--out", par.out, "Write the JSON record here instead of stdout");
  part->add_option("--labels-out", par.labels_out, "Write 'node label' lines here");

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "Run a parameter grid and emit CSV");
  sweep->add_option("--kind", sw.kind, "k | epsilon | noise | powerlaw | supervision")
      ->required()
      ->check(CLI::IsMember({"k", "epsilon", "noise", "powerlaw", "supervision"}));
  sweep->add_option("--grid", sw.grid, "name=start:stop:step or name=v1,v2; axes joined by ';'")
      ->required();
  sweep->add_option("--graph", sw.graph_path, "Fixed graph (otherwise generated per seed)");
  sweep->add_flag("--symmetrize", sw.symmetrize);
  sweep->add_option("--labels", sw.labels, "Metadata for --graph");
  sweep->add_option("--family", sw.family, "Generator family when no --graph is given");
  sweep->add_option("--spec", sw.spec_path, "Generator spec file");
  sweep->add_option("--task", sw.task, "detect | partition (default depends on --kind)");
  sweep->add_option("--seeds", sw.seeds, "Number of seeds per grid point");
  sweep->add_option("--seed", sw.seed, "First seed");
  sweep->add_option("--k", sw.k, "Detector k when not on the grid");
  sweep->add_option("--K", sw.K, "Partition classes when not on the grid");
  sweep->add_option("--C", sw.C);
  sweep->add_option("--nu", sw.nu);
  sweep->add_option("--lambda", sw.lambda, "Supervision weight for --kind supervision");
  sweep->add_option("--frac", sw.frac);
  sweep->add_option("--init", sw.init)->check(CLI::IsMember({"random", "spectral"}));
  sweep->add_option("--restarts", sw.restarts);
  sweep->add_option("--max-iters", sw.max_iters);
  sweep->add_option("--solver", sw.solver);
  sweep->add_option("--out", sw.out, "CSV file (stdout when omitted)");
  sweep->add_flag("--resume", sw.resume, "Skip rows already present in --out");
  sweep->add_flag("--no-wall-time", sw.no_wall_time, "Write NA for wall_ms (byte-identical reruns)");

  MetArgs met;
  auto* metc = app.add_subcommand("met", "Exact (and optionally Monte Carlo) mean exit time");
  met.graph.add(metc);
  metc->add_option("--set", met.set_path, "File of node names")->required();
  metc->add_option("--monte-carlo", met.walks, "Walks per node");
  metc->add_option("--step-cap", met.step_cap);
  metc->add_option("--seed", met.seed);
  metc->add_option("--out", met.out);

  OracleArgs orc;
  auto* oracle = app.add_subcommand("oracle", "Exhaustive optimum on tiny graphs");
  orc.graph.add(oracle);
  auto* bs = oracle->add_option("--best-subgraph", orc.best_subgraph, "k");
  auto* bp = oracle->add_option("--best-partition", orc.best_partition, "K");
  bs->excludes(bp);
  oracle->add_option("--C", orc.C);
  oracle->add_option("--epsilon", orc.epsilon);
  oracle->add_option("--out", orc.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(tc::ExitCode::kValidation);
  }
  if (*oracle && !orc.best_subgraph && !orc.best_partition) {
    std::cerr << "error: oracle needs --best-subgraph or --best-partition\n";
    return static_cast<int>(tc::ExitCode::kValidation);
  }
  if (jobs > 0) tc::set_max_threads(jobs);

  try {
    if (*generate) return run_generate(gen);
    if (*detect) return run_detect(det);
    if (*part) return run_partition(par);
    if (*sweep) return run_sweep(sw);
    if (*metc) return run_met(met);
    if (*oracle) return run_oracle(orc);
  } catch (const tc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
