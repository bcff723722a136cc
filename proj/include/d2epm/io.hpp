#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "d2epm/gibbs.hpp"
#include "d2epm/graph.hpp"
#include "d2epm/model.hpp"
#include "d2epm/rng.hpp"

namespace d2epm {

// ---- event lists -----------------------------------------------------------

struct Event {
  std::uint32_t i, j;
  double time;
};

struct EventList {
  std::vector<Event> events;
  std::vector<std::string> vertex_ids;  // dense ids in order of first appearance
  std::uint64_t dropped_self_loops = 0;
};

namespace detail {

inline bool parse_double(const std::string& token, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(token, &pos);
    return pos == token.size() && std::isfinite(out);
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace detail

// whitespace-separated "src dst time" lines; '#' starts a comment; self-loops
// are dropped and counted
inline EventList load_events(std::istream& in) {
  EventList out;
  std::unordered_map<std::string, std::uint32_t> ids;
  auto intern = [&](const std::string& name) {
    auto [it, fresh] = ids.emplace(name, static_cast<std::uint32_t>(out.vertex_ids.size()));
    if (fresh) out.vertex_ids.push_back(name);
    return it->second;
  };

  std::string line;
  std::uint64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string src, dst, when, extra;
    if (!(fields >> src)) continue;
    if (!(fields >> dst >> when) || fields >> extra) {
      throw std::runtime_error("line " + std::to_string(lineno) +
                               ": expected 'src dst time', got '" + line + "'");
    }
    double time = 0.0;
    if (!detail::parse_double(when, time)) {
      throw std::runtime_error("line " + std::to_string(lineno) + ": bad timestamp '" + when +
                               "'");
    }
    if (src == dst) {
      ++out.dropped_self_loops;
      continue;
    }
    out.events.push_back({intern(src), intern(dst), time});
  }
  if (out.events.empty()) throw std::runtime_error("no events found");
  return out;
}

inline EventList load_events_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return load_events(in);
  } catch (const std::runtime_error& ex) {
    throw std::runtime_error(path + ": " + ex.what());
  }
}

// buckets events into fixed-width windows starting at the earliest timestamp;
// empty intermediate snapshots are kept
inline TemporalGraph aggregate_events(const EventList& list, double window) {
  detail::require(window > 0.0, "window must be positive");
  detail::require(!list.events.empty(), "no events to aggregate");
  detail::require(list.vertex_ids.size() >= 2, "need at least two vertices");

  double t_min = list.events.front().time;
  for (const auto& e : list.events) t_min = std::min(t_min, e.time);

  std::uint32_t steps = 0;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> keyed;  // (t, packed pair)
  keyed.reserve(list.events.size());
  for (const auto& e : list.events) {
    double slot = std::floor((e.time - t_min) / window);
    detail::require(slot < 16e6, "window produces too many snapshots");
    auto t = static_cast<std::uint32_t>(slot);
    steps = std::max(steps, t + 1);
    std::uint32_t i = e.i, j = e.j;
    if (i > j) std::swap(i, j);
    keyed.emplace_back(t, (static_cast<std::uint64_t>(i) << 32) | j);
  }
  std::sort(keyed.begin(), keyed.end());
  keyed.erase(std::unique(keyed.begin(), keyed.end()), keyed.end());

  TemporalGraph g;
  g.num_vertices = static_cast<std::uint32_t>(list.vertex_ids.size());
  g.num_steps = steps;
  g.vertex_ids = list.vertex_ids;
  g.snapshots.resize(steps);
  for (auto [t, packed] : keyed) {
    g.snapshots[t].emplace_back(static_cast<std::uint32_t>(packed >> 32),
                                static_cast<std::uint32_t>(packed & 0xffffffffu));
  }
  return g;
}

// ---- held-out splits ---------------------------------------------------------

// uniform sample without replacement over the (t, i<j) grid, labels recorded
// from the full graph
inline HeldOutMask heldout_split(const TemporalGraph& graph, double fraction, RngStream& rng) {
  detail::require(fraction >= 0.0 && fraction < 1.0, "fraction must lie in [0,1)");
  detail::require(graph.num_vertices >= 2 && graph.num_steps >= 1,
                  "graph must have at least two vertices and one snapshot");

  const std::uint64_t pairs = graph.pair_count();
  const std::uint64_t grid = graph.grid_size();
  const auto count = static_cast<std::uint64_t>(std::llround(fraction * static_cast<double>(grid)));

  // Floyd's algorithm: distinct indices without materializing the grid
  std::set<std::uint64_t> picked;
  for (std::uint64_t j = grid - count; j < grid; ++j) {
    std::uint64_t r = rng.below(j + 1);
    if (!picked.insert(r).second) picked.insert(j);
  }

  const std::uint32_t n = graph.num_vertices;
  auto row_start = [&](std::uint64_t i) { return i * (2 * n - i - 1) / 2; };
  HeldOutMask mask;
  mask.fraction = fraction;
  mask.entries.reserve(picked.size());
  for (std::uint64_t idx : picked) {
    auto t = static_cast<std::uint32_t>(idx / pairs);
    std::uint64_t r = idx % pairs;
    std::uint64_t i = 0;
    while (row_start(i + 1) <= r) ++i;
    auto j = static_cast<std::uint32_t>(i + 1 + (r - row_start(i)));
    auto ii = static_cast<std::uint32_t>(i);
    mask.entries.push_back({t, ii, j, static_cast<std::uint8_t>(graph.has_edge(t, ii, j))});
  }
  return mask;
}

// ---- binary model state ------------------------------------------------------

namespace detail {

constexpr char kStateMagic[8] = {'D', '2', 'E', 'P', 'M', 'S', 'T', 'A'};
constexpr std::uint32_t kStateVersion = 1;

template <class T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw std::runtime_error("truncated state file");
  return v;
}

inline void write_section(std::ostream& os, const std::string& name,
                          const void* data, std::uint64_t bytes) {
  write_pod(os, static_cast<std::uint8_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_pod(os, bytes);
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

}  // namespace detail

inline void save_state(std::ostream& os, const ModelState& state) {
  os.write(detail::kStateMagic, sizeof detail::kStateMagic);
  detail::write_pod(os, detail::kStateVersion);

  std::uint32_t dims[3] = {state.N, state.T, state.K};
  detail::write_section(os, "dims", dims, sizeof dims);
  detail::write_section(os, "eta", &state.eta, sizeof state.eta);
  detail::write_section(os, "lambda", state.lambda.data(), state.lambda.size() * sizeof(double));
  detail::write_section(os, "p", state.p.data(), state.p.size() * sizeof(double));

  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(state.T) * state.K * state.N);
  for (const auto& col : state.phi) flat.insert(flat.end(), col.begin(), col.end());
  detail::write_section(os, "phi", flat.data(), flat.size() * sizeof(double));
  if (!os) throw std::runtime_error("failed writing state");
}

inline void save_state_file(const std::string& path, const ModelState& state) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  save_state(os, state);
}

inline ModelState load_state(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || !std::equal(magic, magic + 8, detail::kStateMagic)) {
    throw std::runtime_error("not a model state file (bad magic)");
  }
  auto version = detail::read_pod<std::uint32_t>(is);
  if (version != detail::kStateVersion) {
    throw std::runtime_error("unsupported state version " + std::to_string(version));
  }

  std::map<std::string, std::vector<char>> sections;
  while (true) {
    std::uint8_t name_len = 0;
    is.read(reinterpret_cast<char*>(&name_len), 1);
    if (is.eof()) break;
    if (!is) throw std::runtime_error("truncated state file");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    auto bytes = detail::read_pod<std::uint64_t>(is);
    std::vector<char> payload(bytes);
    is.read(payload.data(), static_cast<std::streamsize>(bytes));
    if (!is) throw std::runtime_error("truncated state file");
    sections[name] = std::move(payload);  // unknown sections carried but ignored
  }

  auto need = [&](const std::string& name, std::size_t bytes) -> const char* {
    auto it = sections.find(name);
    if (it == sections.end()) throw std::runtime_error("state file missing section " + name);
    if (it->second.size() != bytes) {
      throw std::runtime_error("state section " + name + " has wrong size");
    }
    return it->second.data();
  };

  ModelState state;
  const auto* dims = reinterpret_cast<const std::uint32_t*>(need("dims", 3 * sizeof(std::uint32_t)));
  state.N = dims[0];
  state.T = dims[1];
  state.K = dims[2];
  detail::require(state.N >= 2 && state.T >= 1 && state.K >= 1, "state dims out of range");

  state.eta = *reinterpret_cast<const double*>(need("eta", sizeof(double)));
  const auto* lam = reinterpret_cast<const double*>(need("lambda", state.K * sizeof(double)));
  state.lambda.assign(lam, lam + state.K);
  const auto* p = reinterpret_cast<const double*>(need("p", state.K * sizeof(double)));
  state.p.assign(p, p + state.K);

  std::size_t cols = static_cast<std::size_t>(state.T) * state.K;
  const auto* phi = reinterpret_cast<const double*>(need("phi", cols * state.N * sizeof(double)));
  state.phi.resize(cols);
  for (std::size_t c = 0; c < cols; ++c) {
    state.phi[c].assign(phi + c * state.N, phi + (c + 1) * state.N);
  }
  return state;
}

inline ModelState load_state_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return load_state(is);
}

// ---- csv ---------------------------------------------------------------------

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace) {
  os << "iter,log_joint,eta,lambda_max,active_k,auroc_heldout\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& row : trace) {
    os << row.iter << ',' << row.log_joint << ',' << row.eta << ',' << row.lambda_max << ','
       << row.active_k << ',';
    if (std::isfinite(row.auroc)) os << row.auroc;
    os << '\n';
  }
  if (!os) throw std::runtime_error("failed writing trace");
}

inline void write_predictions_csv(std::ostream& os, const HeldOutMask& mask,
                                  const std::vector<double>& scores) {
  detail::require(scores.size() == mask.entries.size(), "scores do not match mask entries");
  os << "t,i,j,prob,label\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t e = 0; e < scores.size(); ++e) {
    const auto& entry = mask.entries[e];
    os << entry.t << ',' << entry.i << ',' << entry.j << ',' << scores[e] << ','
       << static_cast<int>(entry.label) << '\n';
  }
  if (!os) throw std::runtime_error("failed writing predictions");
}

inline std::vector<ScoredEntry> read_predictions_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("t,i,j,prob,label", 0) != 0) {
    throw std::runtime_error("missing predictions header");
  }
  std::vector<ScoredEntry> out;
  std::uint64_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(fields, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) {
      throw std::runtime_error("line " + std::to_string(lineno) + ": expected 5 columns");
    }
    double prob = 0.0;
    if (!detail::parse_double(cells[3], prob)) {
      throw std::runtime_error("line " + std::to_string(lineno) + ": bad probability");
    }
    bool label = cells[4] == "1";
    if (!label && cells[4] != "0") {
      throw std::runtime_error("line " + std::to_string(lineno) + ": bad label");
    }
    out.push_back({prob, label});
  }
  return out;
}

// ---- flat key = value config ---------------------------------------------------

inline std::vector<std::pair<std::string, std::string>> parse_kv(std::istream& is) {
  auto trim = [](std::string s) {
    auto notspace = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
    s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
    return s;
  };

  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::uint64_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::string body = trim(line);
    if (body.empty()) continue;
    auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw std::runtime_error("line " + std::to_string(lineno) + ": expected key = value");
    }
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

inline std::vector<std::pair<std::string, std::string>> parse_kv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  try {
    return parse_kv(is);
  } catch (const std::runtime_error& ex) {
    throw std::runtime_error(path + ": " + ex.what());
  }
}

}  // namespace d2epm
