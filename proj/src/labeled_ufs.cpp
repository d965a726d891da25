#include "plmb/labeled_ufs.hpp"

#include "plmb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <unordered_map>

namespace plmb {

std::string to_string(const Label& label) {
  return "(" + std::to_string(label.birth_time) + "," + std::to_string(label.index) + ")";
}

void validate_track(const BernoulliTrack& track, double tol) {
  const auto bad = [&](const std::string& what) {
    throw InvalidModelError("track " + to_string(track.label) + ": " + what);
  };
  if (!(track.tau > 0.0) || track.tau > 1.0 + tol) {
    bad("tau must lie in (0, 1], got " + std::to_string(track.tau));
  }
  if (!(track.gamma > 0.0) || track.gamma > 1.0 + tol) {
    bad("gamma must lie in (0, 1], got " + std::to_string(track.gamma));
  }
  if (std::abs(std::max(track.tau, track.gamma) - 1.0) > tol) {
    bad("max(tau, gamma) must equal 1");
  }
  if (track.f.empty()) {
    bad("spatial possibility is empty");
  }
  if (std::abs(supremum(track.f) - 1.0) > tol) {
    bad("spatial possibility is not normalised");
  }
}

LmbDensity::LmbDensity(std::vector<BernoulliTrack> tracks) : tracks_(std::move(tracks)) {
  std::stable_sort(tracks_.begin(), tracks_.end(),
                   [](const auto& a, const auto& b) { return a.label < b.label; });
  for (std::size_t i = 1; i < tracks_.size(); ++i) {
    if (tracks_[i].label == tracks_[i - 1].label) {
      throw DuplicateLabelError("duplicate track label " + to_string(tracks_[i].label));
    }
  }
}

void LmbDensity::insert(BernoulliTrack track) {
  auto it = std::lower_bound(tracks_.begin(), tracks_.end(), track.label,
                             [](const BernoulliTrack& t, const Label& l) { return t.label < l; });
  if (it != tracks_.end() && it->label == track.label) {
    throw DuplicateLabelError("duplicate track label " + to_string(track.label));
  }
  tracks_.insert(it, std::move(track));
}

const BernoulliTrack* LmbDensity::find(const Label& label) const {
  auto it = std::lower_bound(tracks_.begin(), tracks_.end(), label,
                             [](const BernoulliTrack& t, const Label& l) { return t.label < l; });
  if (it != tracks_.end() && it->label == label) {
    return &*it;
  }
  return nullptr;
}

std::vector<Label> LmbDensity::labels() const {
  std::vector<Label> out;
  out.reserve(tracks_.size());
  for (const auto& t : tracks_) {
    out.push_back(t.label);
  }
  return out;
}

LmbDensity merge_disjoint(const LmbDensity& a, const LmbDensity& b) {
  std::vector<BernoulliTrack> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  return LmbDensity(std::move(all));
}

std::vector<Label> GlmbHypothesis::label_set() const {
  std::vector<Label> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    out.push_back(e.label);
  }
  return out;
}

const LabelEntry* GlmbHypothesis::entry(const Label& label) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), label,
                             [](const LabelEntry& e, const Label& l) { return e.label < l; });
  if (it != entries.end() && it->label == label) {
    return &*it;
  }
  return nullptr;
}

bool GlmbHypothesis::contains(const Label& label) const { return entry(label) != nullptr; }

DeltaGlmb::DeltaGlmb(std::vector<GlmbHypothesis> hypotheses) : hypotheses_(std::move(hypotheses)) {
  for (auto& h : hypotheses_) {
    if (!(h.weight > 0.0) || !std::isfinite(h.weight)) {
      throw InvalidModelError("hypothesis weight must be positive and finite");
    }
    std::sort(h.entries.begin(), h.entries.end(),
              [](const LabelEntry& a, const LabelEntry& b) { return a.label < b.label; });
    std::set<int> used;
    for (std::size_t i = 0; i < h.entries.size(); ++i) {
      const auto& e = h.entries[i];
      if (i > 0 && e.label == h.entries[i - 1].label) {
        throw InvalidModelError("hypothesis repeats label " + to_string(e.label));
      }
      if (!e.f || e.f->empty()) {
        throw InvalidModelError("hypothesis entry " + to_string(e.label) + " has no spatial possibility");
      }
      if (e.measurement != kMissed && !used.insert(e.measurement).second) {
        throw InvalidModelError("association map assigns measurement " + std::to_string(e.measurement) +
                                " twice");
      }
    }
  }
}

DeltaGlmb DeltaGlmb::normalized() const {
  if (hypotheses_.empty()) {
    return *this;
  }
  double best = 0.0;
  for (const auto& h : hypotheses_) {
    best = std::max(best, h.weight);
  }
  DeltaGlmb out = *this;
  for (auto& h : out.hypotheses_) {
    h.weight /= best;
  }
  return out;
}

DeltaGlmb lmb_to_delta_glmb(const LmbDensity& d, std::size_t max_hypotheses) {
  if (max_hypotheses == 0) {
    throw ArgumentError("max_hypotheses must be positive");
  }
  const std::size_t n = d.size();
  std::vector<std::shared_ptr<const MaxMixture>> mixtures;
  mixtures.reserve(n);
  // Best choice per track, and the log-cost of flipping it.
  std::vector<bool> best_in(n);
  std::vector<double> flip_cost(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = d[i];
    mixtures.push_back(std::make_shared<const MaxMixture>(t.f));
    best_in[i] = t.gamma > t.tau;
    flip_cost[i] = std::abs(std::log(t.gamma) - std::log(t.tau));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return flip_cost[a] < flip_cost[b]; });

  // Best-first enumeration of flip sets: every subset of sorted positions is
  // reached exactly once through "extend with next" / "replace last by next".
  struct Node {
    double cost;
    std::vector<std::size_t> flips;  // positions into `order`, increasing
    bool operator>(const Node& o) const { return cost > o.cost; }
  };
  std::priority_queue<Node, std::vector<Node>, std::greater<>> frontier;
  std::vector<Node> chosen;
  chosen.push_back({0.0, {}});
  if (n > 0) {
    frontier.push({flip_cost[order[0]], {0}});
  }
  while (chosen.size() < max_hypotheses && !frontier.empty()) {
    Node node = frontier.top();
    frontier.pop();
    const std::size_t last = node.flips.back();
    if (last + 1 < n) {
      Node extend = node;
      extend.flips.push_back(last + 1);
      extend.cost += flip_cost[order[last + 1]];
      frontier.push(std::move(extend));
      Node replace = node;
      replace.flips.back() = last + 1;
      replace.cost += flip_cost[order[last + 1]] - flip_cost[order[last]];
      frontier.push(std::move(replace));
    }
    chosen.push_back(std::move(node));
  }

  std::vector<GlmbHypothesis> hyps;
  hyps.reserve(chosen.size());
  for (const auto& node : chosen) {
    std::vector<bool> in = best_in;
    for (std::size_t pos : node.flips) {
      in[order[pos]] = !in[order[pos]];
    }
    GlmbHypothesis h;
    h.weight = std::exp(-node.cost);
    for (std::size_t i = 0; i < n; ++i) {
      if (in[i]) {
        h.entries.push_back({d[i].label, kMissed, mixtures[i]});
      }
    }
    if (h.weight > 0.0) {
      hyps.push_back(std::move(h));
    }
  }
  return DeltaGlmb(std::move(hyps));
}

LmbDensity delta_glmb_to_lmb(const DeltaGlmb& g) {
  const DeltaGlmb norm = g.normalized();
  struct Accumulator {
    double tau = 0.0;
    double gamma = 0.0;
    // max hypothesis weight per distinct mixture, in first-seen order
    std::vector<std::pair<const MaxMixture*, double>> parts;
  };
  std::map<Label, Accumulator> acc;
  for (const auto& h : norm.hypotheses()) {
    for (const auto& e : h.entries) {
      auto& a = acc[e.label];
      a.gamma = std::max(a.gamma, h.weight);
      auto it = std::find_if(a.parts.begin(), a.parts.end(),
                             [&](const auto& p) { return p.first == e.f.get(); });
      if (it == a.parts.end()) {
        a.parts.emplace_back(e.f.get(), h.weight);
      } else {
        it->second = std::max(it->second, h.weight);
      }
    }
  }
  for (auto& [label, a] : acc) {
    for (const auto& h : norm.hypotheses()) {
      if (!h.contains(label)) {
        a.tau = std::max(a.tau, h.weight);
      }
    }
  }

  std::vector<BernoulliTrack> tracks;
  tracks.reserve(acc.size());
  for (const auto& [label, a] : acc) {
    std::vector<GaussianComponent> comps;
    for (const auto& [mix, w] : a.parts) {
      const double scale = w / a.gamma;
      for (const auto& c : mix->components()) {
        const double cw = c.weight() * scale;
        if (cw > 0.0) {
          comps.push_back(c.with_weight(std::max(cw, std::numeric_limits<double>::min())));
        }
      }
    }
    BernoulliTrack t;
    t.label = label;
    t.tau = std::max(a.tau, kPossibilityFloor);
    t.gamma = std::max(a.gamma, kPossibilityFloor);
    t.f = normalize(MaxMixture(std::move(comps))).mixture;
    tracks.push_back(std::move(t));
  }
  return LmbDensity(std::move(tracks));
}

double presence_function(const LmbDensity& d, const Vector& x) {
  double best = 0.0;
  for (const auto& t : d) {
    best = std::max(best, t.gamma * mixture_eval(t.f, x));
  }
  return best;
}

double presence_function(const DeltaGlmb& g, const Vector& x) {
  double best = 0.0;
  for (const auto& h : g.hypotheses()) {
    for (const auto& e : h.entries) {
      best = std::max(best, h.weight * mixture_eval(*e.f, x));
    }
  }
  return best;
}

double cardinality_possibility(const DeltaGlmb& g, std::size_t n) {
  double best = 0.0;
  for (const auto& h : g.hypotheses()) {
    if (h.entries.size() == n) {
      best = std::max(best, h.weight);
    }
  }
  return best;
}

namespace {

// Tracks ordered by decreasing log(gamma/tau); label order breaks ties
// because the density is already label-sorted and the sort is stable.
std::vector<std::size_t> order_by_existence_ratio(const LmbDensity& d) {
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::log(d[a].gamma) - std::log(d[a].tau) > std::log(d[b].gamma) - std::log(d[b].tau);
  });
  return order;
}

std::vector<double> log_cardinality(const LmbDensity& d, const std::vector<std::size_t>& order) {
  double log_max = 0.0;
  double log_base = 0.0;
  for (const auto& t : d) {
    log_max += std::log(std::max(t.tau, t.gamma));
    log_base += std::log(t.tau);
  }
  std::vector<double> out;
  out.reserve(d.size() + 1);
  double acc = log_base - log_max;
  out.push_back(acc);
  for (std::size_t idx : order) {
    acc += std::log(d[idx].gamma) - std::log(d[idx].tau);
    out.push_back(acc);
  }
  return out;
}

}  // namespace

std::vector<double> cardinality_possibility(const LmbDensity& d) {
  const auto order = order_by_existence_ratio(d);
  auto logs = log_cardinality(d, order);
  for (double& v : logs) {
    v = std::exp(v);
  }
  return logs;
}

std::vector<TrackEstimate> map_estimate(const LmbDensity& d) {
  const auto order = order_by_existence_ratio(d);
  const auto logs = log_cardinality(d, order);
  std::size_t best_n = 0;
  for (std::size_t n = 1; n < logs.size(); ++n) {
    if (logs[n] > logs[best_n] + 1e-12) {
      best_n = n;
    }
  }
  std::vector<std::size_t> picked(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(best_n));
  std::sort(picked.begin(), picked.end());
  std::vector<TrackEstimate> out;
  out.reserve(best_n);
  for (std::size_t idx : picked) {
    out.push_back({d[idx].label, d[idx].f.dominant().mean()});
  }
  return out;
}

}  // namespace plmb
