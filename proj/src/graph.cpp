#include "trapclust/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "trapclust/errors.hpp"

namespace trapclust {

double compensated_sum(std::span<const double> values) {
  double sum = 0.0;
  double carry = 0.0;
  for (double x : values) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      carry += (sum - t) + x;
    } else {
      carry += (x - t) + sum;
    }
    sum = t;
  }
  return sum + carry;
}

Graph Graph::from_edges(NodeIndex n, std::span<const Edge> edges,
                        std::vector<std::string> node_names) {
  if (n < 0) throw ValidationError("negative node count");
  if (!node_names.empty() && static_cast<NodeIndex>(node_names.size()) != n) {
    throw ValidationError("node name count does not match node count");
  }
  if (node_names.empty()) {
    node_names.reserve(n);
    for (NodeIndex i = 0; i < n; ++i) node_names.push_back(std::to_string(i));
  }

  std::vector<Edge> sorted;
  sorted.reserve(edges.size());
  for (const Edge& e : edges) {
    if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n) {
      throw ValidationError("edge endpoint out of range");
    }
    if (!std::isfinite(e.weight)) {
      throw ValidationError("non-finite weight on edge " + node_names[e.src] +
                            " -> " + node_names[e.dst]);
    }
    if (e.weight < 0.0) {
      throw ValidationError("negative weight on edge " + node_names[e.src] +
                            " -> " + node_names[e.dst]);
    }
    if (e.weight > 0.0) sorted.push_back(e);
  }
  std::stable_sort(sorted.begin(), sorted.end(), [](const Edge& a, const Edge& b) {
    return a.src != b.src ? a.src < b.src : a.dst < b.dst;
  });

  Graph g;
  g.n_ = n;
  g.row_ptr_.assign(static_cast<std::size_t>(n) + 1, 0);
  for (std::size_t k = 0; k < sorted.size();) {
    std::size_t end = k;
    double w = 0.0;
    while (end < sorted.size() && sorted[end].src == sorted[k].src &&
           sorted[end].dst == sorted[k].dst) {
      w += sorted[end].weight;
      ++end;
    }
    g.col_.push_back(sorted[k].dst);
    g.weight_.push_back(w);
    ++g.row_ptr_[sorted[k].src + 1];
    k = end;
  }
  for (NodeIndex i = 0; i < n; ++i) g.row_ptr_[i + 1] += g.row_ptr_[i];

  g.degree_.resize(n);
  for (NodeIndex i = 0; i < n; ++i) {
    g.degree_[i] = compensated_sum(g.weights(i));
    if (!(g.degree_[i] > 0.0)) {
      throw ValidationError("node '" + node_names[i] +
                            "' has zero out-degree (dangling); add self-loops "
                            "or remove the node");
    }
  }
  g.names_ = std::move(node_names);
  g.index_.reserve(g.names_.size());
  for (NodeIndex i = 0; i < n; ++i) {
    if (!g.index_.emplace(g.names_[i], i).second) {
      throw ValidationError("duplicate node name '" + g.names_[i] + "'");
    }
  }
  return g;
}

double Graph::weight(NodeIndex i, NodeIndex j) const {
  auto cols = neighbors(i);
  auto it = std::lower_bound(cols.begin(), cols.end(), j);
  if (it == cols.end() || *it != j) return 0.0;
  return weights(i)[static_cast<std::size_t>(it - cols.begin())];
}

std::optional<NodeIndex> Graph::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<Edge> Graph::edges() const {
  std::vector<Edge> out;
  out.reserve(num_edges());
  for (NodeIndex i = 0; i < n_; ++i) {
    auto cols = neighbors(i);
    auto ws = weights(i);
    for (std::size_t k = 0; k < cols.size(); ++k) out.push_back({i, cols[k], ws[k]});
  }
  return out;
}

Graph Graph::symmetrized() const {
  std::vector<Edge> es;
  es.reserve(2 * num_edges());
  for (const Edge& e : edges()) {
    es.push_back({e.src, e.dst, 0.5 * e.weight});
    es.push_back({e.dst, e.src, 0.5 * e.weight});
  }
  return from_edges(n_, es, names_);
}

Graph Graph::transposed() const {
  std::vector<Edge> es = edges();
  for (Edge& e : es) std::swap(e.src, e.dst);
  return from_edges(n_, es, names_);
}

bool Graph::is_symmetric() const {
  for (NodeIndex i = 0; i < n_; ++i) {
    auto cols = neighbors(i);
    auto ws = weights(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (weight(cols[k], i) != ws[k]) return false;
    }
  }
  return true;
}

RowSparseMatrix Graph::adjacency() const {
  RowSparseMatrix a(n_, n_);
  std::vector<Eigen::Triplet<double, int>> trips;
  trips.reserve(num_edges());
  for (const Edge& e : edges()) trips.emplace_back(e.src, e.dst, e.weight);
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

IndicatorVector::IndicatorVector(std::vector<double> phi) : phi_(std::move(phi)) {
  binary_ = true;
  for (double x : phi_) {
    if (!(x >= 0.0 && x <= 1.0)) {
      throw ValidationError("indicator entries must lie in [0,1]");
    }
    if (x != 0.0 && x != 1.0) binary_ = false;
  }
}

IndicatorVector IndicatorVector::from_set(NodeIndex n,
                                          std::span<const NodeIndex> set) {
  std::vector<double> phi(static_cast<std::size_t>(n), 0.0);
  for (NodeIndex i : set) {
    if (i < 0 || i >= n) throw ValidationError("set member out of range");
    phi[i] = 1.0;
  }
  return IndicatorVector(std::move(phi));
}

double IndicatorVector::support_size() const { return compensated_sum(phi_); }

bool IndicatorVector::is_all_ones() const {
  return std::all_of(phi_.begin(), phi_.end(), [](double x) { return x == 1.0; });
}

namespace {

class NodeInterner {
 public:
  NodeIndex intern(const std::string& name) {
    auto [it, inserted] = index_.emplace(name, static_cast<NodeIndex>(names_.size()));
    if (inserted) names_.push_back(name);
    return it->second;
  }
  std::vector<std::string> take_names() { return std::move(names_); }
  NodeIndex size() const { return static_cast<NodeIndex>(names_.size()); }

 private:
  std::unordered_map<std::string, NodeIndex> index_;
  std::vector<std::string> names_;
};

double parse_weight(const std::string& token, std::size_t line) {
  double w = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, w);
  if (ec != std::errc() || ptr != last) {
    throw ParseError(line, "invalid weight '" + token + "'");
  }
  return w;
}

std::string strip_comment(const std::string& raw, char marker) {
  auto pos = raw.find(marker);
  return pos == std::string::npos ? raw : raw.substr(0, pos);
}

Graph finish(NodeIndex n, std::vector<Edge> edges, std::vector<std::string> names,
             const LoadOptions& options) {
  for (const Edge& e : edges) {
    if (e.weight < 0.0) {
      throw ValidationError("negative weight on edge " + names[e.src] + " -> " +
                            names[e.dst]);
    }
  }
  if (options.self_loop_weight < 0.0) {
    throw ValidationError("self-loop weight must be nonnegative");
  }
  if (options.self_loop_weight > 0.0) {
    for (NodeIndex i = 0; i < n; ++i) edges.push_back({i, i, options.self_loop_weight});
  }
  if (options.symmetrize) {
    const std::size_t m = edges.size();
    for (std::size_t k = 0; k < m; ++k) {
      edges[k].weight *= 0.5;
      edges.push_back({edges[k].dst, edges[k].src, edges[k].weight});
    }
  }
  return Graph::from_edges(n, edges, std::move(names));
}

}  // namespace

Graph load_edge_list(std::istream& in, const LoadOptions& options) {
  NodeInterner nodes;
  std::vector<Edge> edges;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::istringstream fields(strip_comment(raw, '#'));
    std::vector<std::string> tok;
    for (std::string t; fields >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok.size() < 2 || tok.size() > 3) {
      throw ParseError(line_no, "expected 'src dst [weight]', got " +
                                    std::to_string(tok.size()) + " fields");
    }
    const double w = tok.size() == 3 ? parse_weight(tok[2], line_no) : 1.0;
    if (!std::isfinite(w)) throw ParseError(line_no, "non-finite weight");
    if (w < 0.0) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": negative weight on edge " + tok[0] + " -> " + tok[1]);
    }
    const NodeIndex s = nodes.intern(tok[0]);
    const NodeIndex d = nodes.intern(tok[1]);
    edges.push_back({s, d, w});
  }
  const NodeIndex n = nodes.size();
  return finish(n, std::move(edges), nodes.take_names(), options);
}

Graph load_matrix_market(std::istream& in, const LoadOptions& options) {
  std::string raw;
  std::size_t line_no = 0;
  if (!std::getline(in, raw)) throw ParseError(1, "empty MatrixMarket stream");
  ++line_no;
  std::istringstream header(raw);
  std::string banner, object, layout, field, symmetry;
  header >> banner >> object >> layout >> field >> symmetry;
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  };
  if (banner != "%%MatrixMarket" || lower(object) != "matrix" ||
      lower(layout) != "coordinate") {
    throw ParseError(line_no, "expected '%%MatrixMarket matrix coordinate' header");
  }
  field = lower(field);
  symmetry = lower(symmetry);
  const bool pattern = field == "pattern";
  if (!pattern && field != "real" && field != "integer") {
    throw ParseError(line_no, "unsupported MatrixMarket field '" + field + "'");
  }
  if (symmetry != "general" && symmetry != "symmetric") {
    throw ParseError(line_no, "unsupported MatrixMarket symmetry '" + symmetry + "'");
  }

  long long rows = -1, cols = -1, nnz = -1;
  while (std::getline(in, raw)) {
    ++line_no;
    std::istringstream fields(strip_comment(raw, '%'));
    if (fields >> rows) {
      if (!(fields >> cols >> nnz)) throw ParseError(line_no, "bad size line");
      break;
    }
  }
  if (rows < 0) throw ParseError(line_no, "missing size line");
  if (rows != cols) throw ValidationError("adjacency matrix must be square");

  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(std::max(nnz, 0LL)));
  long long seen = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::istringstream fields(strip_comment(raw, '%'));
    long long i = 0, j = 0;
    if (!(fields >> i)) continue;
    if (!(fields >> j)) throw ParseError(line_no, "expected 'row col [value]'");
    double w = 1.0;
    if (!pattern) {
      std::string tok;
      if (!(fields >> tok)) throw ParseError(line_no, "missing value");
      w = parse_weight(tok, line_no);
    }
    if (i < 1 || i > rows || j < 1 || j > cols) {
      throw ParseError(line_no, "index out of range");
    }
    if (w < 0.0) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": negative weight on edge " + std::to_string(i) +
                            " -> " + std::to_string(j));
    }
    edges.push_back({static_cast<NodeIndex>(i - 1), static_cast<NodeIndex>(j - 1), w});
    if (symmetry == "symmetric" && i != j) {
      edges.push_back({static_cast<NodeIndex>(j - 1), static_cast<NodeIndex>(i - 1), w});
    }
    ++seen;
  }
  if (seen != nnz) {
    throw ParseError(line_no, "expected " + std::to_string(nnz) + " entries, read " +
                                  std::to_string(seen));
  }
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(rows));
  for (long long i = 1; i <= rows; ++i) names.push_back(std::to_string(i));
  return finish(static_cast<NodeIndex>(rows), std::move(edges), std::move(names),
                options);
}

Graph load_graph(const std::string& path, const LoadOptions& options,
                 GraphFormat format) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open graph file '" + path + "'");
  if (format == GraphFormat::kAuto) {
    const bool mtx = path.size() >= 4 && path.compare(path.size() - 4, 4, ".mtx") == 0;
    format = mtx ? GraphFormat::kMatrixMarket : GraphFormat::kEdgeList;
    if (!mtx && in.peek() == '%') format = GraphFormat::kMatrixMarket;
  }
  return format == GraphFormat::kMatrixMarket ? load_matrix_market(in, options)
                                              : load_edge_list(in, options);
}

namespace {

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

}  // namespace

void save_edge_list(const Graph& g, std::ostream& out) {
  for (NodeIndex i = 0; i < g.size(); ++i) {
    auto cols = g.neighbors(i);
    auto ws = g.weights(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      out << g.name(i) << ' ' << g.name(cols[k]) << ' ' << format_double(ws[k]) << '\n';
    }
  }
}

std::size_t NodeLabels::num_labeled() const {
  return static_cast<std::size_t>(
      std::count_if(label.begin(), label.end(), [](const auto& l) { return l.has_value(); }));
}

NodeLabels load_labels(std::istream& in, const Graph& g) {
  NodeLabels out;
  out.label.assign(static_cast<std::size_t>(g.size()), std::nullopt);
  std::unordered_map<std::string, int> class_ids;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::istringstream fields(strip_comment(raw, '#'));
    std::string node, cls, extra;
    if (!(fields >> node)) continue;
    if (!(fields >> cls) || (fields >> extra)) {
      throw ParseError(line_no, "expected 'node label'");
    }
    auto idx = g.find(node);
    if (!idx) continue;  // metadata for nodes outside the graph is ignored
    auto [it, inserted] = class_ids.emplace(cls, static_cast<int>(out.class_names.size()));
    if (inserted) out.class_names.push_back(cls);
    if (out.label[*idx] && *out.label[*idx] != it->second) {
      throw ValidationError("conflicting labels for node '" + node + "'");
    }
    out.label[*idx] = it->second;
  }
  return out;
}

NodeLabels load_labels(const std::string& path, const Graph& g) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open label file '" + path + "'");
  return load_labels(in, g);
}

void save_labels(const Graph& g, std::span<const int> labels, std::ostream& out) {
  if (static_cast<NodeIndex>(labels.size()) != g.size()) {
    throw ValidationError("label vector length does not match graph");
  }
  for (NodeIndex i = 0; i < g.size(); ++i) out << g.name(i) << ' ' << labels[i] << '\n';
}

NodeSet load_node_set(std::istream& in, const Graph& g) {
  std::vector<NodeIndex> set;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::istringstream fields(strip_comment(raw, '#'));
    for (std::string tok; fields >> tok;) {
      auto idx = g.find(tok);
      if (!idx) throw ParseError(line_no, "unknown node '" + tok + "'");
      set.push_back(*idx);
    }
  }
  return normalize_set(g.size(), std::move(set));
}

SparseMatrix laplacian(const Graph& g) {
  const NodeIndex n = g.size();
  std::vector<Eigen::Triplet<double, int>> trips;
  trips.reserve(g.num_edges() + static_cast<std::size_t>(n));
  const auto& d = g.out_degree();
  for (NodeIndex i = 0; i < n; ++i) {
    auto cols = g.neighbors(i);
    auto ws = g.weights(i);
    double diag = d[i];
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (cols[k] == i) {
        diag -= ws[k];
      } else {
        trips.emplace_back(i, cols[k], -ws[k]);
      }
    }
    trips.emplace_back(i, i, diag);
  }
  SparseMatrix l(n, n);
  l.setFromTriplets(trips.begin(), trips.end());
  l.makeCompressed();
  return l;
}

double laplacian_frobenius(const Graph& g) {
  const SparseMatrix l = laplacian(g);
  std::vector<double> squares;
  squares.reserve(static_cast<std::size_t>(l.nonZeros()));
  for (int c = 0; c < l.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(l, c); it; ++it) squares.push_back(it.value() * it.value());
  }
  return std::sqrt(compensated_sum(squares));
}

namespace {

std::vector<bool> reachable(const Graph& g, NodeIndex start, bool reverse) {
  const NodeIndex n = g.size();
  std::vector<std::vector<NodeIndex>> rev;
  if (reverse) {
    rev.resize(static_cast<std::size_t>(n));
    for (NodeIndex i = 0; i < n; ++i) {
      for (NodeIndex j : g.neighbors(i)) rev[j].push_back(i);
    }
  }
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::vector<NodeIndex> stack{start};
  seen[start] = true;
  while (!stack.empty()) {
    const NodeIndex v = stack.back();
    stack.pop_back();
    auto visit = [&](NodeIndex w) {
      if (!seen[w]) {
        seen[w] = true;
        stack.push_back(w);
      }
    };
    if (reverse) {
      for (NodeIndex w : rev[v]) visit(w);
    } else {
      for (NodeIndex w : g.neighbors(v)) visit(w);
    }
  }
  return seen;
}

}  // namespace

bool is_strongly_connected(const Graph& g) {
  if (g.size() <= 1) return true;
  auto all = [](const std::vector<bool>& v) {
    return std::all_of(v.begin(), v.end(), [](bool b) { return b; });
  };
  return all(reachable(g, 0, false)) && all(reachable(g, 0, true));
}

std::vector<int> strongly_connected_components(const Graph& g) {
  const NodeIndex n = g.size();
  std::vector<int> comp(static_cast<std::size_t>(n), -1);
  std::vector<int> index(static_cast<std::size_t>(n), -1);
  std::vector<int> low(static_cast<std::size_t>(n), 0);
  std::vector<bool> on_stack(static_cast<std::size_t>(n), false);
  std::vector<NodeIndex> scc_stack;
  // (node, next neighbor offset) frames
  std::vector<std::pair<NodeIndex, std::size_t>> frames;
  int counter = 0;
  int n_comp = 0;

  for (NodeIndex root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    frames.emplace_back(root, 0);
    index[root] = low[root] = counter++;
    scc_stack.push_back(root);
    on_stack[root] = true;
    while (!frames.empty()) {
      auto& [v, next] = frames.back();
      auto nbrs = g.neighbors(v);
      if (next < nbrs.size()) {
        const NodeIndex w = nbrs[next++];
        if (index[w] == -1) {
          index[w] = low[w] = counter++;
          scc_stack.push_back(w);
          on_stack[w] = true;
          frames.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      const NodeIndex done = v;
      frames.pop_back();
      if (!frames.empty()) {
        const NodeIndex parent = frames.back().first;
        low[parent] = std::min(low[parent], low[done]);
      }
      if (low[done] == index[done]) {
        NodeIndex w;
        do {
          w = scc_stack.back();
          scc_stack.pop_back();
          on_stack[w] = false;
          comp[w] = n_comp;
        } while (w != done);
        ++n_comp;
      }
    }
  }
  return comp;
}

NodeSet closed_subset(const Graph& g, std::span<const NodeIndex> set) {
  const NodeIndex n = g.size();
  const auto in_set = membership(n, set);
  std::vector<std::vector<NodeIndex>> rev(static_cast<std::size_t>(n));
  for (NodeIndex i = 0; i < n; ++i) {
    for (NodeIndex j : g.neighbors(i)) rev[j].push_back(i);
  }
  // Backward search from the complement marks every node that can escape.
  std::vector<bool> escapes(static_cast<std::size_t>(n), false);
  std::vector<NodeIndex> stack;
  for (NodeIndex i = 0; i < n; ++i) {
    if (!in_set[i]) {
      escapes[i] = true;
      stack.push_back(i);
    }
  }
  while (!stack.empty()) {
    const NodeIndex v = stack.back();
    stack.pop_back();
    for (NodeIndex w : rev[v]) {
      if (!escapes[w]) {
        escapes[w] = true;
        stack.push_back(w);
      }
    }
  }
  NodeSet closed;
  for (NodeIndex i : set) {
    if (!escapes[i]) closed.push_back(i);
  }
  return closed;
}

NodeSet normalize_set(NodeIndex n, std::vector<NodeIndex> set) {
  for (NodeIndex i : set) {
    if (i < 0 || i >= n) throw ValidationError("node index out of range in set");
  }
  std::sort(set.begin(), set.end());
  set.erase(std::unique(set.begin(), set.end()), set.end());
  return set;
}

std::vector<bool> membership(NodeIndex n, std::span<const NodeIndex> set) {
  std::vector<bool> in(static_cast<std::size_t>(n), false);
  for (NodeIndex i : set) in[i] = true;
  return in;
}

}  // namespace trapclust
