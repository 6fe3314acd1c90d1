#pragma once

#include <cmath>
#include <optional>
#include <string>

#include <opencv2/imgproc.hpp>

#include "ngtr/image.hpp"
#include "ngtr/lines.hpp"
#include "ngtr/toolkit.hpp"

namespace ngtr {

enum class Scenario {
  Blur,
  Underexposure,
  Overexposure,
  UnclearBorders,
  MissingBorders,
  ThickenedBorders,
  Tilt20,
  Tilt40,
};

inline const std::vector<Scenario>& all_scenarios() {
  static const std::vector<Scenario> s = {
      Scenario::Blur,          Scenario::Underexposure, Scenario::Overexposure,
      Scenario::UnclearBorders, Scenario::MissingBorders, Scenario::ThickenedBorders,
      Scenario::Tilt20,        Scenario::Tilt40};
  return s;
}

inline std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::Blur: return "blur";
    case Scenario::Underexposure: return "underexposure";
    case Scenario::Overexposure: return "overexposure";
    case Scenario::UnclearBorders: return "unclear_borders";
    case Scenario::MissingBorders: return "missing_borders";
    case Scenario::ThickenedBorders: return "thickened_borders";
    case Scenario::Tilt20: return "tilt20";
    case Scenario::Tilt40: return "tilt40";
  }
  return "?";
}

inline Scenario scenario_from_string(std::string_view name) {
  for (Scenario s : all_scenarios())
    if (to_string(s) == name) return s;
  throw UnknownScenarioError("unknown degradation scenario: " + std::string(name));
}

/// Knobs for the degradation scenarios. The scenario names and tilt angles
/// are fixed; these strengths are configurable defaults recorded in every
/// manifest line.
struct DegradeConfig {
  double blur_sigma = 2.0;
  int blur_ksize = 13;
  double underexposure_gamma = 2.5;
  double overexposure_gamma = 0.4;
  double border_fade = 0.7;  // blend factor toward background
  int thicken_px = 3;
  LineDetectParams lines;
};

namespace detail {

inline cv::Mat gamma_lut(double gamma) {
  cv::Mat lut(1, 256, CV_8U);
  for (int v = 0; v < 256; ++v)
    lut.at<uint8_t>(v) =
        cv::saturate_cast<uint8_t>(std::lround(255.0 * std::pow(v / 255.0, gamma)));
  return lut;
}

inline cv::Scalar background_estimate(const cv::Mat& pixels, const cv::Mat& line_mask) {
  // median per channel over non-line pixels
  cv::Mat inv;
  cv::bitwise_not(line_mask, inv);
  std::vector<cv::Mat> chans;
  cv::split(pixels, chans);
  cv::Scalar bg;
  for (size_t ch = 0; ch < chans.size(); ++ch) {
    int hist[256] = {0};
    long n = 0;
    for (int r = 0; r < pixels.rows; ++r) {
      const uint8_t* row = chans[ch].ptr<uint8_t>(r);
      const uint8_t* keep = inv.ptr<uint8_t>(r);
      for (int c = 0; c < pixels.cols; ++c)
        if (keep[c]) { ++hist[row[c]]; ++n; }
    }
    long half = n / 2, cum = 0;
    int med = 255;
    for (int v = 0; v < 256; ++v) {
      cum += hist[v];
      if (cum >= half) { med = v; break; }
    }
    bg[static_cast<int>(ch)] = med;
  }
  return bg;
}

inline cv::Mat rotate_expand(const cv::Mat& src, double angle_deg) {
  cv::Point2f center(src.cols / 2.0f, src.rows / 2.0f);
  cv::Mat m = cv::getRotationMatrix2D(center, angle_deg, 1.0);
  double c = std::abs(m.at<double>(0, 0)), s = std::abs(m.at<double>(0, 1));
  int new_w = static_cast<int>(std::lround(src.rows * s + src.cols * c));
  int new_h = static_cast<int>(std::lround(src.rows * c + src.cols * s));
  m.at<double>(0, 2) += new_w / 2.0 - center.x;
  m.at<double>(1, 2) += new_h / 2.0 - center.y;
  cv::Mat out;
  cv::warpAffine(src, out, m, {new_w, new_h}, cv::INTER_LINEAR, cv::BORDER_CONSTANT,
                 cv::Scalar::all(255));
  return out;
}

}  // namespace detail

/// Formats the effective parameters of a scenario for manifests and
/// provenance, so degraded corpora stay comparable across runs.
inline std::string degrade_params_string(Scenario s, const DegradeConfig& cfg) {
  switch (s) {
    case Scenario::Blur:
      return "sigma=" + std::to_string(cfg.blur_sigma) + ",ksize=" + std::to_string(cfg.blur_ksize);
    case Scenario::Underexposure: return "gamma=" + std::to_string(cfg.underexposure_gamma);
    case Scenario::Overexposure: return "gamma=" + std::to_string(cfg.overexposure_gamma);
    case Scenario::UnclearBorders: return "fade=" + std::to_string(cfg.border_fade);
    case Scenario::MissingBorders: return "fill=background_median";
    case Scenario::ThickenedBorders: return "thickness=" + std::to_string(cfg.thicken_px);
    case Scenario::Tilt20: return "angle=20";
    case Scenario::Tilt40: return "angle=40";
  }
  return "";
}

inline TableImage degrade(const TableImage& img, Scenario scenario, uint64_t seed,
                          const DegradeConfig& cfg = {}) {
  validate_image(img);
  std::string note = "degrade(scenario=" + to_string(scenario) + "," +
                     degrade_params_string(scenario, cfg) + ",seed=" + std::to_string(seed) + ")";
  cv::Mat out;
  switch (scenario) {
    case Scenario::Blur:
      cv::GaussianBlur(img.pixels, out, {cfg.blur_ksize, cfg.blur_ksize}, cfg.blur_sigma,
                       cfg.blur_sigma);
      break;
    case Scenario::Underexposure:
      cv::LUT(img.pixels, detail::gamma_lut(cfg.underexposure_gamma), out);
      break;
    case Scenario::Overexposure:
      cv::LUT(img.pixels, detail::gamma_lut(cfg.overexposure_gamma), out);
      break;
    case Scenario::UnclearBorders: {
      cv::Mat mask = ruling_line_mask(img.pixels, cfg.lines);
      cv::Scalar bg = detail::background_estimate(img.pixels, mask);
      out = img.pixels.clone();
      cv::Mat faded;
      cv::addWeighted(img.pixels, 1.0 - cfg.border_fade,
                      cv::Mat(img.pixels.size(), img.pixels.type(), bg), cfg.border_fade, 0.0,
                      faded);
      faded.copyTo(out, mask);
      break;
    }
    case Scenario::MissingBorders: {
      cv::Mat mask = ruling_line_mask(img.pixels, cfg.lines);
      cv::Scalar bg = detail::background_estimate(img.pixels, mask);
      out = img.pixels.clone();
      out.setTo(bg, mask);
      break;
    }
    case Scenario::ThickenedBorders: {
      ToolkitConfig tk;
      tk.border_thickness = cfg.thicken_px;
      tk.lines = cfg.lines;
      TableImage thick = border_enhance(img, tk);
      out = thick.pixels;
      break;
    }
    case Scenario::Tilt20:
      out = detail::rotate_expand(img.pixels, 20.0);
      break;
    case Scenario::Tilt40:
      out = detail::rotate_expand(img.pixels, 40.0);
      break;
    default:
      throw UnknownScenarioError("unknown degradation scenario");
  }
  return derive_image(img, out, note);
}

}  // namespace ngtr
