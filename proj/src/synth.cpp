#include "trapclust/synth.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <sstream>

#include "trapclust/errors.hpp"
#include "trapclust/execution.hpp"

namespace trapclust {

NodeIndex MickeeSpec::background_size() const {
  const NodeIndex planted = std::accumulate(block_sizes.begin(), block_sizes.end(), NodeIndex{0});
  return total_nodes - planted;
}

double MickeeSpec::intra_probability(std::size_t b) const {
  const double size = static_cast<double>(block_sizes.at(b));
  if (intra_degree) return size > 1 ? *intra_degree / (size - 1.0) : 0.0;
  return intra_density.value_or(0.0);
}

double MickeeSpec::background_probability() const {
  const double size = static_cast<double>(background_size());
  if (background_degree) return size > 1 ? *background_degree / (size - 1.0) : 0.0;
  return background_density.value_or(0.0);
}

double MickeeSpec::inter_probability() const {
  if (inter_degree) {
    const double partners = static_cast<double>(total_nodes - block_sizes.front());
    return *inter_degree / partners;
  }
  return inter_density.value_or(0.0);
}

void MickeeSpec::validate() const {
  if (block_sizes.empty()) throw ValidationError("MICKEE needs at least one planted block");
  for (std::size_t b = 0; b < block_sizes.size(); ++b) {
    if (block_sizes[b] < 2) throw ValidationError("planted blocks need at least 2 nodes");
    if (b > 0 && block_sizes[b] < block_sizes[b - 1]) {
      throw ValidationError("planted block sizes must be nondecreasing");
    }
  }
  if (background_size() < 2) {
    throw ValidationError("block sizes leave fewer than 2 background nodes");
  }
  auto check_prob = [](double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ValidationError(std::string(what) + " must translate to a probability in [0,1]");
    }
  };
  for (std::size_t b = 0; b < block_sizes.size(); ++b) check_prob(intra_probability(b), "intra density/degree");
  if (!powerlaw_exponent) check_prob(background_probability(), "background density/degree");
  check_prob(inter_probability(), "inter density/degree");
  if (!(intra_weight > 0.0)) throw ValidationError("intra weight must be positive");
  if (!(inter_weight > 0.0)) throw ValidationError("inter weight must be positive");
  if (powerlaw_exponent && !(*powerlaw_exponent > 2.0)) {
    throw ValidationError("power-law exponent must exceed 2");
  }
  if (max_retries < 1) throw ValidationError("max_retries must be >= 1");
}

NodeSet PlantedGraph::group(int label) const {
  NodeSet out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) out.push_back(static_cast<NodeIndex>(i));
  }
  return out;
}

std::vector<NodeIndex> sample_powerlaw_degrees(NodeIndex count, double exponent,
                                               NodeIndex min_degree, NodeIndex max_degree,
                                               std::uint64_t seed) {
  if (min_degree < 1 || max_degree < min_degree) {
    throw ValidationError("invalid power-law degree range");
  }
  std::vector<double> w;
  for (NodeIndex k = min_degree; k <= max_degree; ++k) {
    w.push_back(std::pow(static_cast<double>(k), -exponent));
  }
  std::discrete_distribution<NodeIndex> dist(w.begin(), w.end());
  Rng rng = make_rng(seed, 0x9d5);
  std::vector<NodeIndex> out(static_cast<std::size_t>(count));
  for (auto& d : out) d = min_degree + dist(rng);
  return out;
}

double fit_powerlaw_exponent(const std::vector<NodeIndex>& values, NodeIndex min_value) {
  double log_sum = 0.0;
  std::size_t m = 0;
  const double base = static_cast<double>(min_value) - 0.5;
  for (NodeIndex x : values) {
    if (x >= min_value) {
      log_sum += std::log(static_cast<double>(x) / base);
      ++m;
    }
  }
  if (m == 0 || log_sum <= 0.0) throw ValidationError("no tail samples to fit");
  return 1.0 + static_cast<double>(m) / log_sum;
}

namespace {

struct UndirectedEdge {
  NodeIndex a;
  NodeIndex b;
  double w;
};

class DisjointSets {
 public:
  explicit DisjointSets(NodeIndex n) : parent_(static_cast<std::size_t>(n)) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  NodeIndex find(NodeIndex x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  bool unite(NodeIndex a, NodeIndex b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[a] = b;
    return true;
  }

 private:
  std::vector<NodeIndex> parent_;
};

bool connected(NodeIndex n, const std::vector<UndirectedEdge>& edges) {
  DisjointSets sets(n);
  NodeIndex components = n;
  for (const auto& e : edges) {
    if (sets.unite(e.a, e.b)) --components;
  }
  return components == 1;
}

// Appends ER edges among nodes [first, first + size) with probability p.
void add_er_block(NodeIndex first, NodeIndex size, double p, double w, Rng& rng,
                  std::vector<UndirectedEdge>& out) {
  if (p <= 0.0) return;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (NodeIndex i = 0; i < size; ++i) {
    for (NodeIndex j = i + 1; j < size; ++j) {
      if (unif(rng) < p) out.push_back({first + i, first + j, w});
    }
  }
}

void add_configuration_block(NodeIndex first, NodeIndex size, const MickeeSpec& spec,
                             Rng& rng, std::vector<UndirectedEdge>& out) {
  std::vector<NodeIndex> degrees = sample_powerlaw_degrees(
      size, *spec.powerlaw_exponent, spec.powerlaw_min_degree, size - 1, rng());
  const auto total = std::accumulate(degrees.begin(), degrees.end(), std::int64_t{0});
  if (total % 2 != 0) {
    std::uniform_int_distribution<NodeIndex> pick(0, size - 1);
    ++degrees[pick(rng)];
  }
  std::vector<NodeIndex> stubs;
  for (NodeIndex i = 0; i < size; ++i) {
    stubs.insert(stubs.end(), static_cast<std::size_t>(degrees[i]), first + i);
  }
  std::shuffle(stubs.begin(), stubs.end(), rng);
  // Loopy multigraph: self-loops stay, parallel edges are summed by Graph.
  for (std::size_t s = 0; s + 1 < stubs.size(); s += 2) {
    out.push_back({std::min(stubs[s], stubs[s + 1]), std::max(stubs[s], stubs[s + 1]), 1.0});
  }
}

PlantedGraph build_mickee(const MickeeSpec& spec, bool powerlaw) {
  spec.validate();
  const NodeIndex n = spec.total_nodes;
  const auto n_blocks = static_cast<int>(spec.block_sizes.size());

  std::vector<int> labels(static_cast<std::size_t>(n), n_blocks);
  std::vector<NodeIndex> first(spec.block_sizes.size() + 1, 0);
  for (int b = 0; b < n_blocks; ++b) {
    first[b + 1] = first[b] + spec.block_sizes[b];
    std::fill(labels.begin() + first[b], labels.begin() + first[b + 1], b);
  }
  const NodeIndex bg_first = first[n_blocks];
  const NodeIndex bg_size = spec.background_size();

  Rng rng = make_rng(spec.seed, powerlaw ? 0x70 : 0x6d);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double rho = spec.inter_probability();

  for (int attempt = 1; attempt <= spec.max_retries; ++attempt) {
    std::vector<UndirectedEdge> edges;
    for (int b = 0; b < n_blocks; ++b) {
      add_er_block(first[b], spec.block_sizes[b], spec.intra_probability(b),
                   spec.intra_weight, rng, edges);
    }
    if (powerlaw) {
      add_configuration_block(bg_first, bg_size, spec, rng, edges);
    } else {
      add_er_block(bg_first, bg_size, spec.background_probability(), spec.intra_weight,
                   rng, edges);
    }

    const std::size_t inter_begin = edges.size();
    if (rho > 0.0) {
      for (NodeIndex i = 0; i < n; ++i) {
        for (NodeIndex j = i + 1; j < n; ++j) {
          if (labels[i] != labels[j] && unif(rng) < rho) edges.push_back({i, j, 0.0});
        }
      }
    }
    switch (spec.inter_weight_dist) {
      case WeightDistribution::kConstant:
        for (std::size_t e = inter_begin; e < edges.size(); ++e) edges[e].w = spec.inter_weight;
        break;
      case WeightDistribution::kUniform:
        for (std::size_t e = inter_begin; e < edges.size(); ++e) {
          edges[e].w = spec.inter_weight * (1.0 - unif(rng));
        }
        break;
      case WeightDistribution::kHalfNormal: {
        std::normal_distribution<double> normal(0.0, 1.0);
        double peak = 0.0;
        for (std::size_t e = inter_begin; e < edges.size(); ++e) {
          edges[e].w = std::abs(normal(rng));
          peak = std::max(peak, edges[e].w);
        }
        for (std::size_t e = inter_begin; e < edges.size(); ++e) {
          edges[e].w = peak > 0.0 ? spec.inter_weight * edges[e].w / peak : spec.inter_weight;
          // A zero draw would silently drop the edge.
          if (edges[e].w <= 0.0) edges[e].w = spec.inter_weight * 1e-12;
        }
        break;
      }
    }

    if (!connected(n, edges)) continue;

    std::vector<Edge> directed;
    directed.reserve(2 * edges.size());
    for (const auto& e : edges) {
      directed.push_back({e.a, e.b, e.w});
      directed.push_back({e.b, e.a, e.w});
    }
    PlantedGraph out;
    out.graph = Graph::from_edges(n, directed);
    out.labels = labels;
    out.attempts = attempt;
    return out;
  }
  throw ValidationError("MICKEE generator did not produce a connected graph in " +
                        std::to_string(spec.max_retries) +
                        " attempts; increase densities or degrees");
}

}  // namespace

PlantedGraph generate_mickee(const MickeeSpec& spec) {
  return build_mickee(spec, spec.powerlaw_exponent.has_value());
}

PlantedGraph generate_powerlaw_mickee(const MickeeSpec& spec) {
  if (!spec.powerlaw_exponent) throw ValidationError("power-law MICKEE needs an exponent");
  const double q = *spec.powerlaw_exponent;
  if (q < 2.1 - 1e-12 || q > 4.0 + 1e-12) {
    throw ValidationError("power-law exponent must lie in [2.1, 4]");
  }
  return build_mickee(spec, true);
}

PlantedGraph generate_er_cycle(const ErCycleSpec& spec) {
  if (spec.n_cycle < 3) throw ValidationError("cycle needs at least 3 nodes");
  if (spec.n_er < 2) throw ValidationError("ER block needs at least 2 nodes");
  if (!(spec.p_er > 0.0 && spec.p_er <= 1.0)) throw ValidationError("p_er must lie in (0,1]");
  if (!(spec.p_to_cycle > 0.0 && spec.p_to_cycle <= 1.0)) {
    throw ValidationError("p_to_cycle must lie in (0,1]");
  }
  if (!(spec.w_in > 0.0)) throw ValidationError("w_in must be positive");

  const NodeIndex n_er = spec.n_er;
  const NodeIndex n = n_er + spec.n_cycle;
  Rng rng = make_rng(spec.seed, 0xec);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<NodeIndex> pick_cycle(0, spec.n_cycle - 1);
  std::uniform_int_distribution<NodeIndex> pick_er(0, n_er - 1);

  for (int attempt = 1; attempt <= spec.max_retries; ++attempt) {
    std::vector<std::vector<std::pair<NodeIndex, double>>> rows(static_cast<std::size_t>(n_er));
    for (NodeIndex i = 0; i < n_er; ++i) {
      for (NodeIndex j = 0; j < n_er; ++j) {
        if (i != j && unif(rng) < spec.p_er) rows[i].emplace_back(j, 1.0);
      }
    }
    std::size_t into_cycle = 0;
    for (NodeIndex i = 0; i < n_er; ++i) {
      if (unif(rng) < spec.p_to_cycle) {
        rows[i].emplace_back(n_er + pick_cycle(rng), spec.w_in);
        ++into_cycle;
      }
    }
    if (into_cycle == 0) rows[pick_er(rng)].emplace_back(n_er + pick_cycle(rng), spec.w_in);

    bool dangling = false;
    double degree_sum = 0.0;
    std::size_t edge_count = 0;
    for (const auto& row : rows) {
      if (row.empty()) dangling = true;
      for (const auto& [j, w] : row) degree_sum += w;
      edge_count += row.size();
    }
    if (dangling) continue;
    const double target = degree_sum / static_cast<double>(n_er);
    // Mean weight of a rescaled ER edge.
    const double exit_weight = target * static_cast<double>(n_er) / static_cast<double>(edge_count);

    std::vector<Edge> edges;
    for (NodeIndex i = 0; i < n_er; ++i) {
      double row_sum = 0.0;
      for (const auto& [j, w] : rows[i]) row_sum += w;
      for (const auto& [j, w] : rows[i]) edges.push_back({i, j, w * target / row_sum});
    }
    for (NodeIndex c = 0; c < spec.n_cycle; ++c) {
      edges.push_back({n_er + c, n_er + (c + 1) % spec.n_cycle, target});
    }
    edges.push_back({n_er, pick_er(rng), exit_weight});

    Graph g = Graph::from_edges(n, edges);
    if (!is_strongly_connected(g)) continue;
    PlantedGraph out;
    out.graph = std::move(g);
    out.labels.assign(static_cast<std::size_t>(n), 0);
    std::fill(out.labels.begin() + n_er, out.labels.end(), 1);
    out.attempts = attempt;
    return out;
  }
  throw ValidationError("ER+cycle generator did not produce a strongly connected graph in " +
                        std::to_string(spec.max_retries) + " attempts; increase p_er");
}

PlantedGraph generate_er_cycle(NodeIndex n_er, NodeIndex n_cycle, double p_er, double w_in,
                               std::uint64_t seed) {
  ErCycleSpec spec;
  spec.n_er = n_er;
  spec.n_cycle = n_cycle;
  spec.p_er = p_er;
  spec.w_in = w_in;
  spec.seed = seed;
  return generate_er_cycle(spec);
}

SpecEntries read_spec_entries(std::istream& in) {
  SpecEntries out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto pos = raw.find('#'); pos != std::string::npos) raw.resize(pos);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    raw = trim(raw);
    if (raw.empty()) continue;
    const auto eq = raw.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected key=value");
    out[trim(raw.substr(0, eq))] = trim(raw.substr(eq + 1));
  }
  return out;
}

namespace {

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double x = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return x;
  } catch (const std::exception&) {
    throw ValidationError("spec key '" + key + "' expects a number, got '" + value + "'");
  }
}

long long to_int(const std::string& key, const std::string& value) {
  const double x = to_double(key, value);
  if (x != std::floor(x)) throw ValidationError("spec key '" + key + "' expects an integer");
  return static_cast<long long>(x);
}

}  // namespace

MickeeSpec mickee_spec_from(const SpecEntries& entries) {
  MickeeSpec spec;
  for (const auto& [key, value] : entries) {
    if (key == "total_nodes" || key == "N") {
      spec.total_nodes = static_cast<NodeIndex>(to_int(key, value));
    } else if (key == "block_sizes") {
      spec.block_sizes.clear();
      std::stringstream ss(value);
      for (std::string tok; std::getline(ss, tok, ',');) {
        spec.block_sizes.push_back(static_cast<NodeIndex>(to_int(key, tok)));
      }
    } else if (key == "intra_density") {
      spec.intra_density = to_double(key, value);
      spec.intra_degree.reset();
    } else if (key == "intra_degree") {
      spec.intra_degree = to_double(key, value);
      spec.intra_density.reset();
    } else if (key == "intra_weight") {
      spec.intra_weight = to_double(key, value);
    } else if (key == "background_density") {
      spec.background_density = to_double(key, value);
      spec.background_degree.reset();
    } else if (key == "background_degree") {
      spec.background_degree = to_double(key, value);
      spec.background_density.reset();
    } else if (key == "inter_density") {
      spec.inter_density = to_double(key, value);
      spec.inter_degree.reset();
    } else if (key == "inter_degree") {
      spec.inter_degree = to_double(key, value);
      spec.inter_density.reset();
    } else if (key == "inter_weight_dist") {
      if (value == "constant") {
        spec.inter_weight_dist = WeightDistribution::kConstant;
      } else if (value == "halfnormal" || value == "normal") {
        spec.inter_weight_dist = WeightDistribution::kHalfNormal;
      } else if (value == "uniform") {
        spec.inter_weight_dist = WeightDistribution::kUniform;
      } else {
        throw ValidationError("unknown inter_weight_dist '" + value + "'");
      }
    } else if (key == "inter_weight") {
      spec.inter_weight = to_double(key, value);
    } else if (key == "powerlaw_exponent") {
      spec.powerlaw_exponent = to_double(key, value);
    } else if (key == "powerlaw_min_degree") {
      spec.powerlaw_min_degree = static_cast<NodeIndex>(to_int(key, value));
    } else if (key == "max_retries") {
      spec.max_retries = static_cast<int>(to_int(key, value));
    } else if (key == "seed") {
      spec.seed = static_cast<std::uint64_t>(to_int(key, value));
    } else {
      throw ValidationError("unknown MICKEE spec key '" + key + "'");
    }
  }
  return spec;
}

ErCycleSpec er_cycle_spec_from(const SpecEntries& entries) {
  ErCycleSpec spec;
  for (const auto& [key, value] : entries) {
    if (key == "n_er") {
      spec.n_er = static_cast<NodeIndex>(to_int(key, value));
    } else if (key == "n_cycle") {
      spec.n_cycle = static_cast<NodeIndex>(to_int(key, value));
    } else if (key == "p_er") {
      spec.p_er = to_double(key, value);
    } else if (key == "p_to_cycle") {
      spec.p_to_cycle = to_double(key, value);
    } else if (key == "w_in") {
      spec.w_in = to_double(key, value);
    } else if (key == "max_retries") {
      spec.max_retries = static_cast<int>(to_int(key, value));
    } else if (key == "seed") {
      spec.seed = static_cast<std::uint64_t>(to_int(key, value));
    } else {
      throw ValidationError("unknown ER+cycle spec key '" + key + "'");
    }
  }
  return spec;
}

}  // namespace trapclust
