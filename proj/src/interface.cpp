#include "atwflow/interface.hpp"

#include <cmath>
#include <limits>
#include <unordered_map>

namespace atwflow {

namespace {

struct KeyedSegment {
  Segment seg;
  long long key_a;
  long long key_b;
};

std::vector<KeyedSegment> march(const ScalarField& level) {
  const Grid& g = level.grid;
  std::vector<KeyedSegment> out;
  // Crossing on the lattice edge leaving (i, j) along +x (axis 0) or +y (axis 1).
  auto crossing = [&](int i, int j, int axis) {
    int i2 = i + (axis == 0), j2 = j + (axis == 1);
    double p = level(i, j), q = level(i2, j2);
    double t = p / (p - q);
    return Vec2(g.center(i, j) + t * (g.center(i2, j2) - g.center(i, j)));
  };
  auto key = [&](int i, int j, int axis) { return 2 * static_cast<long long>(g.index(i, j)) + axis; };

  for (int j = 0; j + 1 < g.ny; ++j) {
    for (int i = 0; i + 1 < g.nx; ++i) {
      // Corners counter-clockwise and the edge leaving each of them.
      const int ci[4] = {i, i + 1, i + 1, i};
      const int cj[4] = {j, j, j + 1, j + 1};
      double v[4];
      bool in[4];
      int n_in = 0;
      for (int k = 0; k < 4; ++k) {
        v[k] = level(ci[k], cj[k]);
        in[k] = v[k] < 0.0;
        n_in += in[k];
      }
      if (n_in == 0 || n_in == 4) continue;
      // Edge k joins corner k and corner k+1.
      auto edge_point = [&](int k) {
        switch (k) {
          case 0: return crossing(i, j, 0);
          case 1: return crossing(i + 1, j, 1);
          case 2: return crossing(i, j + 1, 0);
          default: return crossing(i, j, 1);
        }
      };
      auto edge_key = [&](int k) {
        switch (k) {
          case 0: return key(i, j, 0);
          case 1: return key(i + 1, j, 1);
          case 2: return key(i, j + 1, 0);
          default: return key(i, j, 1);
        }
      };
      auto emit = [&](int k_out, int k_in) {
        Vec2 a = edge_point(k_out), b = edge_point(k_in);
        Vec2 d = b - a;
        double len = d.norm();
        Vec2 n = len > 0.0 ? Vec2(d.y() / len, -d.x() / len) : Vec2::Zero();
        out.push_back({{a, b, n}, edge_key(k_out), edge_key(k_in)});
      };
      int outs[2], ins[2], no = 0, ni = 0;
      for (int k = 0; k < 4; ++k) {
        bool a = in[k], b = in[(k + 1) % 4];
        if (a && !b) outs[no++] = k;
        if (!a && b) ins[ni++] = k;
      }
      if (no == 1) {
        emit(outs[0], ins[0]);
      } else {
        double center = 0.25 * (v[0] + v[1] + v[2] + v[3]);
        for (int s = 0; s < 2; ++s) {
          int ko = outs[s];
          emit(ko, center < 0.0 ? (ko + 1) % 4 : (ko + 3) % 4);
        }
      }
    }
  }
  return out;
}

}  // namespace

std::vector<Segment> extract_interface(const ScalarField& level) {
  std::vector<Segment> out;
  for (const auto& ks : march(level))
    if (ks.seg.length() > 0.0) out.push_back(ks.seg);
  return out;
}

namespace {

/// Chains of march() indices; open chains first.
std::vector<std::pair<std::vector<std::size_t>, bool>> chain(const std::vector<KeyedSegment>& segs) {
  std::unordered_map<long long, std::size_t> by_start, by_end;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    by_start[segs[s].key_a] = s;
    by_end[segs[s].key_b] = s;
  }
  std::vector<char> used(segs.size(), 0);
  std::vector<std::pair<std::vector<std::size_t>, bool>> out;
  auto walk_from = [&](std::size_t s, bool open) {
    std::vector<std::size_t> line;
    while (!used[s]) {
      used[s] = 1;
      line.push_back(s);
      auto it = by_start.find(segs[s].key_b);
      if (it == by_start.end()) break;
      s = it->second;
    }
    out.emplace_back(std::move(line), !open);
  };
  for (std::size_t s = 0; s < segs.size(); ++s)
    if (!used[s] && by_end.find(segs[s].key_a) == by_end.end()) walk_from(s, true);
  for (std::size_t s = 0; s < segs.size(); ++s)
    if (!used[s]) walk_from(s, false);
  return out;
}

}  // namespace

std::vector<std::vector<Vec2>> interface_loops(const ScalarField& level) {
  std::vector<KeyedSegment> segs = march(level);
  std::vector<std::vector<Vec2>> loops;
  for (const auto& [line, closed] : chain(segs)) {
    std::vector<Vec2> pts{segs[line.front()].seg.a};
    for (std::size_t s : line) pts.push_back(segs[s].seg.b);
    loops.push_back(std::move(pts));
  }
  return loops;
}

std::vector<InterfaceChain> interface_chains(const ScalarField& level) {
  std::vector<KeyedSegment> segs = march(level);
  std::vector<std::size_t> kept(segs.size(), 0);
  for (std::size_t s = 0, n = 0; s < segs.size(); ++s) kept[s] = segs[s].seg.length() > 0.0 ? n++ : segs.size();
  std::vector<InterfaceChain> out;
  for (const auto& [line, closed] : chain(segs)) {
    InterfaceChain c;
    c.closed = closed;
    for (std::size_t s : line)
      if (kept[s] < segs.size()) c.segments.push_back(kept[s]);
    if (!c.segments.empty()) out.push_back(std::move(c));
  }
  return out;
}

double perimeter(const std::vector<Segment>& segments, const AnisotropyModel& phi) {
  double acc = 0.0;
  for (const Segment& s : segments) acc += phi.value(s.midpoint(), s.normal) * s.length();
  return acc;
}

double perimeter(const SetState& e, const AnisotropyModel& phi) {
  return perimeter(extract_interface(e.level()), phi);
}

double hausdorff_distance(const std::vector<Segment>& a, const std::vector<Segment>& b) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
  auto points = [](const std::vector<Segment>& s) {
    std::vector<Vec2> p;
    p.reserve(2 * s.size());
    for (const Segment& seg : s) {
      p.push_back(seg.a);
      p.push_back(seg.midpoint());
    }
    return p;
  };
  std::vector<Vec2> pa = points(a), pb = points(b);
  auto directed = [](const std::vector<Vec2>& from, const std::vector<Vec2>& to) {
    double worst = 0.0;
    for (const Vec2& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec2& q : to) best = std::min(best, (p - q).squaredNorm());
      worst = std::max(worst, best);
    }
    return std::sqrt(worst);
  };
  return std::max(directed(pa, pb), directed(pb, pa));
}

}  // namespace atwflow
