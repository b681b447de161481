#pragma once

// Independent reference computations used only by tests. Nothing here calls
// into the library paths it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <vector>

namespace parp::oracle {

/// Textbook triple loop, C = A * B.
inline std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b,
                                        std::size_t m, std::size_t k, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  return c;
}

/// Collapse a frame path: merge repeats then drop blanks.
inline std::vector<int> ctc_collapse(const std::vector<int>& path, int blank) {
  std::vector<int> out;
  int prev = -1;
  for (int s : path) {
    if (s != prev && s != blank) out.push_back(s);
    prev = s;
  }
  return out;
}

/// -log sum over every length-T path that collapses to `target`, by
/// enumerating all V^T paths. `probs` is row-major [T x V] in probability space.
inline double ctc_bruteforce_nll(const std::vector<double>& probs, std::size_t frames,
                                 std::size_t vocab, const std::vector<int>& target, int blank) {
  std::vector<int> path(frames, 0);
  double total = 0.0;
  while (true) {
    if (ctc_collapse(path, blank) == target) {
      double p = 1.0;
      for (std::size_t t = 0; t < frames; ++t) p *= probs[t * vocab + static_cast<std::size_t>(path[t])];
      total += p;
    }
    std::size_t pos = 0;
    while (pos < frames && ++path[pos] == static_cast<int>(vocab)) path[pos++] = 0;
    if (pos == frames) break;
  }
  return -std::log(total);
}

/// IOU and overlap on explicit index sets of kept positions.
struct SetOverlap {
  double iou;
  double overlap;
};

inline SetOverlap set_overlap(const std::vector<bool>& a, const std::vector<bool>& b) {
  std::set<std::size_t> ka, kb, inter, uni;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]) ka.insert(i);
    if (b[i]) kb.insert(i);
  }
  for (auto i : ka) {
    uni.insert(i);
    if (kb.count(i)) inter.insert(i);
  }
  for (auto i : kb) uni.insert(i);
  const double iou = uni.empty() ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
  return {iou, static_cast<double>(inter.size()) / static_cast<double>(a.size())};
}

/// Lloyd's k-means with farthest-point seeding over row vectors. Returns the
/// centroids after convergence (or `iters` rounds).
inline std::vector<std::vector<double>> kmeans(const std::vector<std::vector<double>>& points,
                                               std::size_t k, std::size_t iters = 50) {
  auto dist2 = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
  };
  std::vector<std::vector<double>> centers{points.front()};
  while (centers.size() < k) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t p = 0; p < points.size(); ++p) {
      double d = 1e300;
      for (const auto& c : centers) d = std::min(d, dist2(points[p], c));
      if (d > best_d) {
        best_d = d;
        best = p;
      }
    }
    centers.push_back(points[best]);
  }
  std::vector<std::size_t> assign(points.size(), 0);
  for (std::size_t it = 0; it < iters; ++it) {
    for (std::size_t p = 0; p < points.size(); ++p) {
      double d = 1e300;
      for (std::size_t c = 0; c < k; ++c)
        if (double e = dist2(points[p], centers[c]); e < d) {
          d = e;
          assign[p] = c;
        }
    }
    std::vector<std::vector<double>> sum(k, std::vector<double>(points.front().size(), 0.0));
    std::vector<std::size_t> n(k, 0);
    for (std::size_t p = 0; p < points.size(); ++p) {
      ++n[assign[p]];
      for (std::size_t i = 0; i < points[p].size(); ++i) sum[assign[p]][i] += points[p][i];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (n[c] == 0) continue;
      centers[c] = sum[c];
      for (auto& v : centers[c]) v /= static_cast<double>(n[c]);
    }
  }
  return centers;
}

}  // namespace parp::oracle
