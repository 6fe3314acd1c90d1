#include <catch2/catch_amalgamated.hpp>

#include "ngtr/degrade.hpp"
#include "ngtr/lines.hpp"
#include "ngtr/synth.hpp"
#include "ngtr/toolkit.hpp"
#include "support/image_fixtures.hpp"

using namespace ngtr;

TEST_CASE("border_enhance thickens ruling lines") {
  SECTION("1px grid grows to 1+2*thickness") {
    TableImage in = imgfix::grid(480, 360, 5, 6, /*stroke=*/1);
    int row = 180;  // between horizontal lines
    REQUIRE(imgfix::vertical_stroke_width(in, row) == 1);
    TableImage out = border_enhance(in);
    CHECK(imgfix::vertical_stroke_width(out, row) == 5);
    CHECK(out.provenance.size() == 1);
  }
  SECTION("5px grid grows to 9") {
    TableImage in = imgfix::grid(480, 360, 5, 6, /*stroke=*/5);
    REQUIRE(imgfix::vertical_stroke_width(in, 180) == 5);
    TableImage out = border_enhance(in);
    CHECK(imgfix::vertical_stroke_width(out, 180) == 9);
  }
  SECTION("text-only image is returned pixel-identical with provenance") {
    TableImage in = imgfix::text_only();
    TableImage out = border_enhance(in);
    CHECK(pixels_identical(in, out));
    REQUIRE(out.provenance.size() == 1);
    CHECK(out.provenance[0].find("no-lines") != std::string::npos);
  }
  SECTION("pixels farther than thickness+1 from a line stay untouched") {
    TableImage in = imgfix::grid();
    cv::putText(in.pixels, "cell", {60, 100}, cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(90), 1);
    ToolkitConfig cfg;
    TableImage out = border_enhance(in, cfg);
    cv::Mat mask = ruling_line_mask(in.pixels, cfg.lines);
    cv::Mat near;
    int reach = 2 * (cfg.border_thickness + 1) + 1;
    cv::dilate(mask, near, cv::getStructuringElement(cv::MORPH_RECT, {reach, reach}));
    cv::Mat diff = to_gray(in.pixels) != to_gray(out.pixels);
    cv::Mat far_diff;
    cv::bitwise_and(diff, ~near, far_diff);
    CHECK(cv::countNonZero(far_diff) == 0);
  }
}

TEST_CASE("upscale scales dimensions bicubically") {
  TableImage in = imgfix::grid(200, 100);
  SECTION("factor 2 doubles both dimensions") {
    TableImage out = upscale(in, 2.0);
    CHECK(out.width() == 400);
    CHECK(out.height() == 200);
  }
  SECTION("factor 1 is pixel-identical") {
    TableImage out = upscale(in, 1.0);
    CHECK(pixels_identical(in, out));
    CHECK(out.provenance.size() == 1);
  }
  SECTION("odd dimensions round") {
    TableImage small = imgfix::blank(33, 21);
    TableImage out = upscale(small, 1.5);
    CHECK(out.width() == 50);   // round(49.5)
    CHECK(out.height() == 32);  // round(31.5)
  }
  SECTION("pixel budget enforced") {
    TableImage big = imgfix::blank(3000, 3000);
    CHECK_THROWS_AS(upscale(big, 4.0), SizeError);
  }
  SECTION("factor outside [1,4] rejected") {
    CHECK_THROWS_AS(upscale(in, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(upscale(in, 4.5), std::invalid_argument);
  }
}

TEST_CASE("noise_reduce stretches contrast and removes speckle") {
  SECTION("uniform image survives the degenerate histogram") {
    TableImage in = imgfix::blank(64, 64, 137);
    TableImage out = noise_reduce(in);
    double mn, mx;
    cv::minMaxLoc(out.pixels, &mn, &mx);
    CHECK(mn == 137);
    CHECK(mx == 137);
  }
  SECTION("underexposed two-band fixture lands at mid intensity") {
    TableImage fixture = imgfix::blank(200, 200, 200);
    fixture.pixels(cv::Rect(0, 0, 200, 100)).setTo(90);  // heavy ink coverage
    TableImage dark = degrade(fixture, Scenario::Underexposure, 1);
    CHECK(cv::mean(dark.pixels)[0] < 90);  // visibly darkened
    TableImage restored = noise_reduce(dark);
    double mean = cv::mean(restored.pixels)[0];
    CHECK(mean >= 100.0);
    CHECK(mean <= 160.0);
  }
  SECTION("salt-and-pepper speckle count drops by 90 percent") {
    TableImage in = imgfix::blank(200, 200, 255);
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> xd(0, 199), yd(0, 199);
    for (int i = 0; i < 800; ++i) in.pixels.at<uint8_t>(yd(rng), xd(rng)) = 0;
    long before = imgfix::count_dark(in);
    REQUIRE(before > 500);
    TableImage out = noise_reduce(in);
    long after = imgfix::count_dark(out);
    CHECK(after <= before / 10);
  }
}

TEST_CASE("binarize produces a two-valued image via Otsu") {
  SECTION("bimodal image separates at the mode gap") {
    TableImage in = imgfix::blank(100, 100, 210);
    in.pixels(cv::Rect(0, 0, 50, 100)).setTo(40);
    TableImage out = binarize(in);
    CHECK(out.pixels.at<uint8_t>(50, 10) == 0);
    CHECK(out.pixels.at<uint8_t>(50, 90) == 255);
    double mn, mx;
    cv::minMaxLoc(out.pixels, &mn, &mx);
    CHECK(mn == 0);
    CHECK(mx == 255);
  }
  SECTION("all-white stays all-white") {
    TableImage out = binarize(imgfix::blank(64, 64, 255));
    double mn, mx;
    cv::minMaxLoc(out.pixels, &mn, &mx);
    CHECK(mn == 255);
  }
  SECTION("idempotent on already-binary input") {
    TableImage once = binarize(imgfix::grid());
    TableImage twice = binarize(once);
    CHECK(pixels_identical(once, twice));
  }
}

TEST_CASE("detect_and_crop finds the table region") {
  SECTION("table in the right half") {
    TableImage in = imgfix::blank(800, 400);
    // paste a grid into the right half; known bbox
    TableImage g = imgfix::grid(360, 320, 4, 4, 1, 255, 0, 10);
    g.pixels.copyTo(in.pixels(cv::Rect(420, 40, 360, 320)));
    // grid ink spans x in [430, 770], y in [50, 350]
    TableImage out = detect_and_crop(in);
    CHECK(out.width() >= 340);
    CHECK(out.width() <= 370);
    CHECK(out.height() >= 300);
    CHECK(out.height() <= 330);
  }
  SECTION("full-frame table keeps at least 90 percent of the area") {
    TableImage in = imgfix::grid(480, 360, 5, 6, 1, 255, 0, 8);
    TableImage out = detect_and_crop(in);
    double ratio = static_cast<double>(out.width()) * out.height() /
                   (static_cast<double>(in.width()) * in.height());
    CHECK(ratio >= 0.9);
  }
  SECTION("blank image returns unchanged with NoTableFound note") {
    TableImage in = imgfix::blank();
    TableImage out = detect_and_crop(in);
    CHECK(pixels_identical(in, out));
    REQUIRE(out.provenance.size() == 1);
    CHECK(out.provenance[0].find("NoTableFound") != std::string::npos);
  }
}

TEST_CASE("degrade scenarios") {
  TableImage base = imgfix::grid(480, 360, 5, 6, 1);
  cv::putText(base.pixels, "mark", {120, 100}, cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(0), 1);

  SECTION("every scenario is byte-deterministic given seed") {
    for (Scenario s : all_scenarios()) {
      TableImage a = degrade(base, s, 42);
      TableImage b = degrade(base, s, 42);
      INFO(to_string(s));
      CHECK(pixel_digest(a) == pixel_digest(b));
      CHECK(a.provenance.size() == 1);
    }
  }
  SECTION("tilt rotates by the stated angle within half a degree") {
    TableImage t20 = degrade(base, Scenario::Tilt20, 0);
    CHECK(std::abs(dominant_line_angle_deg(t20) - 20.0) <= 0.5);
    TableImage t40 = degrade(base, Scenario::Tilt40, 0);
    CHECK(std::abs(dominant_line_angle_deg(t40) - 40.0) <= 0.5);
    // canvas expanded to contain the rotated content
    CHECK(t20.width() > base.width());
    CHECK(t20.height() > base.height());
  }
  SECTION("missing borders leaves no detectable ruling lines") {
    REQUIRE(count_ruling_lines(base) > 0);
    TableImage out = degrade(base, Scenario::MissingBorders, 0);
    CHECK(count_ruling_lines(out) == 0);
  }
  SECTION("unclear borders fades lines but keeps them present") {
    TableImage out = degrade(base, Scenario::UnclearBorders, 0);
    cv::Mat mask = ruling_line_mask(base.pixels);
    double before = cv::mean(to_gray(base.pixels), mask)[0];
    double after = cv::mean(to_gray(out.pixels), mask)[0];
    CHECK(after > before + 50);  // pushed toward background
  }
  SECTION("under- then over-exposure is not the identity") {
    // dark midtones collapse to 0 under gamma 2.5 and cannot be recovered
    TableImage shaded = base;
    shaded.pixels = base.pixels.clone();
    shaded.pixels(cv::Rect(40, 40, 200, 120)).setTo(12);
    TableImage ue = degrade(shaded, Scenario::Underexposure, 0);
    TableImage round = degrade(ue, Scenario::Overexposure, 0);
    double mean_in = cv::mean(to_gray(shaded.pixels))[0];
    double mean_out = cv::mean(to_gray(round.pixels))[0];
    CHECK(std::abs(mean_in - mean_out) > 1.0);
  }
  SECTION("thickened borders widens strokes") {
    TableImage out = degrade(base, Scenario::ThickenedBorders, 0);
    CHECK(imgfix::vertical_stroke_width(out, 180) == 7);  // 1 + 2*3
  }
  SECTION("unknown scenario name") {
    CHECK_THROWS_AS(scenario_from_string("fisheye"), UnknownScenarioError);
  }
}

TEST_CASE("transforms append exactly one provenance entry and keep input intact") {
  TableImage in = imgfix::grid();
  in.provenance.push_back("origin");
  for (ToolId id : all_tools()) {
    TableImage out = apply_tool(id, in);
    INFO(to_string(id));
    CHECK(out.provenance.size() == 2);
    CHECK(out.provenance[0] == "origin");
    CHECK(in.provenance.size() == 1);
  }
}

TEST_CASE("render_table_image draws a parsable grid") {
  std::mt19937_64 rng(3);
  LogicalTable t = random_logical_table(rng);
  TableImage img = render_table_image(t, {}, "synth");
  validate_image(img);
  CHECK(count_ruling_lines(img) > 0);
}
