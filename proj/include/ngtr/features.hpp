#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <numeric>
#include <vector>

#include <opencv2/features2d.hpp>

#include "ngtr/errors.hpp"
#include "ngtr/image.hpp"

namespace ngtr {

struct Keypoint {
  float x = 0, y = 0;
  float angle_rad = 0;
  float response = 0;
};

using Descriptor = std::array<uint8_t, 32>;  // 256-bit binary descriptor

struct FeatureSet {
  std::vector<Keypoint> keypoints;
  std::vector<Descriptor> descriptors;

  size_t size() const { return descriptors.size(); }
  bool empty() const { return descriptors.empty(); }
};

struct FeatureParams {
  int max_features = 500;
  int min_keypoints = 8;
  int hamming_threshold = 64;  // of 256 bits
  bool ratio_test = false;     // alternative to mutual-NN matching
  double ratio = 0.8;
};

/// ORB keypoints + 256-bit descriptors in a canonical order (response
/// desc, then y, x, angle) so repeated extraction is byte-identical.
inline FeatureSet extract_features(const TableImage& img, const FeatureParams& params = {}) {
  validate_image(img);
  cv::Mat gray = to_gray(img.pixels);
  auto orb = cv::ORB::create(params.max_features);
  std::vector<cv::KeyPoint> kps;
  cv::Mat desc;
  orb->detectAndCompute(gray, cv::noArray(), kps, desc);
  if (static_cast<int>(kps.size()) < params.min_keypoints)
    throw FeaturelessError("only " + std::to_string(kps.size()) + " keypoints found in '" +
                           img.id + "'");

  std::vector<size_t> order(kps.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (kps[a].response != kps[b].response) return kps[a].response > kps[b].response;
    if (kps[a].pt.y != kps[b].pt.y) return kps[a].pt.y < kps[b].pt.y;
    if (kps[a].pt.x != kps[b].pt.x) return kps[a].pt.x < kps[b].pt.x;
    return kps[a].angle < kps[b].angle;
  });

  FeatureSet fs;
  fs.keypoints.reserve(kps.size());
  fs.descriptors.reserve(kps.size());
  for (size_t i : order) {
    const auto& kp = kps[i];
    fs.keypoints.push_back(Keypoint{kp.pt.x, kp.pt.y,
                                    static_cast<float>(kp.angle * CV_PI / 180.0), kp.response});
    Descriptor d{};
    std::memcpy(d.data(), desc.ptr(static_cast<int>(i)), 32);
    fs.descriptors.push_back(d);
  }
  return fs;
}

inline int hamming_distance(const Descriptor& a, const Descriptor& b) {
  int dist = 0;
  for (size_t i = 0; i < 32; i += 8) {
    uint64_t wa, wb;
    std::memcpy(&wa, a.data() + i, 8);
    std::memcpy(&wb, b.data() + i, 8);
    dist += std::popcount(wa ^ wb);
  }
  return dist;
}

namespace detail {

inline std::vector<int> nearest_indices(const std::vector<Descriptor>& from,
                                        const std::vector<Descriptor>& to) {
  std::vector<int> nn(from.size(), -1);
  for (size_t i = 0; i < from.size(); ++i) {
    int best = 257, best_j = -1;
    for (size_t j = 0; j < to.size(); ++j) {
      int d = hamming_distance(from[i], to[j]);
      if (d < best) {  // ties keep the lowest index
        best = d;
        best_j = static_cast<int>(j);
      }
    }
    nn[i] = best_j;
  }
  return nn;
}

}  // namespace detail

/// Mutual-nearest-neighbor match count under Hamming distance, normalized
/// by the smaller keypoint count. Symmetric by construction. The optional
/// ratio test replaces mutuality with Lowe's distance-ratio criterion.
inline double similarity(const FeatureSet& a, const FeatureSet& b, const FeatureParams& params = {}) {
  if (a.empty() || b.empty()) return 0.0;
  size_t matches = 0;
  if (params.ratio_test) {
    for (size_t i = 0; i < a.descriptors.size(); ++i) {
      int best = 257, second = 257;
      for (size_t j = 0; j < b.descriptors.size(); ++j) {
        int d = hamming_distance(a.descriptors[i], b.descriptors[j]);
        if (d < best) { second = best; best = d; }
        else if (d < second) second = d;
      }
      if (best < params.hamming_threshold &&
          (second == 257 || best < params.ratio * second))
        ++matches;
    }
  } else {
    std::vector<int> ab = detail::nearest_indices(a.descriptors, b.descriptors);
    std::vector<int> ba = detail::nearest_indices(b.descriptors, a.descriptors);
    for (size_t i = 0; i < ab.size(); ++i) {
      int j = ab[i];
      if (j >= 0 && ba[static_cast<size_t>(j)] == static_cast<int>(i) &&
          hamming_distance(a.descriptors[i], b.descriptors[static_cast<size_t>(j)]) <
              params.hamming_threshold)
        ++matches;
    }
  }
  return static_cast<double>(matches) / static_cast<double>(std::min(a.size(), b.size()));
}

}  // namespace ngtr
