#include <gtest/gtest.h>

#include <fstream>

#include "refine/templates.hpp"
#include "support/temp_dir.hpp"

namespace refine {
namespace {

const TemplateSet& defaults() {
  static const TemplateSet set = TemplateSet::defaults();
  return set;
}

TEST(Render, CritiqueSubstitutesAndCarriesOneImage) {
  const auto req = render(defaults().stage(Stage::critique),
                          {{"question", "What color is the pot?"}, {"best_response", "red"}}, "img.png");
  ASSERT_EQ(req.messages.size(), 1u);
  EXPECT_EQ(req.messages[0].role, Role::user);
  EXPECT_EQ(req.image_count(), 1u);
  const auto text = req.joined_text();
  EXPECT_NE(text.find("What color is the pot?"), std::string::npos);
  EXPECT_NE(text.find("red"), std::string::npos);
  EXPECT_EQ(req.stage, "critique");
}

TEST(Render, DecidePreservesCandidateOrder) {
  const auto req =
      render(defaults().stage(Stage::decide), {{"question", "q"}, {"candidate_a", "X"}, {"candidate_b", "Y"}}, "i");
  const auto text = req.joined_text();
  ASSERT_NE(text.find("X"), std::string::npos);
  EXPECT_LT(text.find("Response A: X"), text.find("Response B: Y"));
}

TEST(Render, MissingBindingFails) {
  try {
    render(defaults().stage(Stage::revise), {{"question", "q"}, {"best_response", "r"}}, "i");
    FAIL();
  } catch (const TemplateError& e) {
    EXPECT_EQ(e.kind(), TemplateError::Kind::missing_placeholder);
    EXPECT_EQ(e.placeholder(), "feedback");
  }
}

TEST(Render, ExtraBindingOrMissingImageFails) {
  EXPECT_THROW(render(defaults().stage(Stage::initial), {{"question", "q"}, {"feedback", "f"}}, "i"), TemplateError);
  try {
    render(defaults().stage(Stage::initial), {{"question", "q"}}, std::nullopt);
    FAIL();
  } catch (const TemplateError& e) {
    EXPECT_EQ(e.placeholder(), "image");
  }
}

TEST(Render, AllInferenceStagesHaveExactlyOneImage) {
  const Bindings b0 = {{"question", "q"}};
  EXPECT_EQ(render(defaults().stage(Stage::initial), b0, "i").image_count(), 1u);
  EXPECT_EQ(render(defaults().stage(Stage::critique), {{"question", "q"}, {"best_response", "r"}}, "i").image_count(), 1u);
  EXPECT_EQ(render(defaults().stage(Stage::revise), {{"question", "q"}, {"best_response", "r"}, {"feedback", "f"}}, "i")
                .image_count(),
            1u);
}

TEST(Render, IsPureAndSinglePass) {
  const auto& t = defaults().stage(Stage::critique);
  const Bindings b = {{"question", "{best_response}"}, {"best_response", "literal {question}"}};
  const auto r1 = render(t, b, "i");
  const auto r2 = render(t, b, "i");
  EXPECT_EQ(r1.messages, r2.messages);
  EXPECT_NE(r1.joined_text().find("Question: {best_response}"), std::string::npos);
  EXPECT_NE(r1.joined_text().find("literal {question}"), std::string::npos);
}

TEST(Render, ImagePlaceholderPositionIsRespected) {
  auto t = StageTemplate::load(Stage::initial, "Before {image} after: {question}");
  const auto req = render(t, {{"question", "Q"}}, "pic.jpg");
  const auto& c = req.messages[0].content;
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[0], Segment::text("Before "));
  EXPECT_EQ(c[1], Segment::image("pic.jpg"));
  EXPECT_EQ(c[2], Segment::text(" after: Q"));
}

TEST(Load, PlaceholderMismatchFailsAtLoad) {
  EXPECT_THROW(StageTemplate::load(Stage::critique, "{image}{question}"), TemplateError);  // no best_response
  EXPECT_THROW(StageTemplate::load(Stage::initial, "{image}{question}{gold_answer}"), TemplateError);
  EXPECT_THROW(StageTemplate::load(Stage::initial, "{image}{image}{question}"), TemplateError);
  EXPECT_NO_THROW(StageTemplate::load(Stage::initial, "{image} {question} JSON like {\"a\": 1} and {Upper} pass"));
}

TEST(Load, DirectoryOverridesOnlyPresentFiles) {
  testing_support::TempDir dir;
  std::ofstream(dir / "initial.txt") << "{image}Custom: {question}";
  const auto set = TemplateSet::load_dir(dir.path());
  EXPECT_EQ(set.stage(Stage::initial).tmpl.body(), "{image}Custom: {question}");
  EXPECT_EQ(set.stage(Stage::critique).tmpl.body(), defaults().stage(Stage::critique).tmpl.body());

  std::ofstream(dir / "revise.txt") << "{image}{question}{best_response}";  // feedback missing
  EXPECT_THROW(TemplateSet::load_dir(dir.path()), TemplateError);
}

TEST(Defaults, DecideAsksForForcedChoice) {
  const auto& body = defaults().stage(Stage::decide).tmpl.body();
  EXPECT_NE(body.find("\"Response A\" or \"Response B\""), std::string::npos);
}

TEST(Scan, FindsOnlyLowercaseNames) {
  EXPECT_EQ(scan_placeholders("{a} {B} {c_d} {} {x y}"), (std::vector<std::string>{"a", "c_d"}));
}

}  // namespace
}  // namespace refine
