#include <doctest.h>

#include <sstream>

#include "l2swbm/errors.hpp"
#include "l2swbm/ingest.hpp"
#include "support.hpp"

using namespace l2swbm;

namespace {

SeriesDeclaration decl(Component c = Component::P) { return SeriesDeclaration{"SUP", c, 1, "mm", {}}; }

ComponentSeries parse(const std::string& text, Component c = Component::P) {
  std::istringstream in(text);
  return parse_series(in, decl(c));
}

ComponentSeries levels(std::vector<double> v, YearMonth start = {2005, 1}) {
  ComponentSeries s;
  s.lake = "SUP";
  s.component = Component::H;
  s.start = start;
  for (double x : v) s.values.push_back(x);
  return s;
}

}  // namespace

TEST_CASE("calendar month index wraps from the span start") {
  CHECK(calendar_month({2005, 1}, 1) == 1);
  CHECK(calendar_month({2005, 1}, 12) == 12);
  CHECK(calendar_month({2005, 1}, 13) == 1);
  CHECK(calendar_month({2005, 11}, 3) == 1);
  CHECK(YearMonth{2008, 11}.plus(2) == YearMonth{2009, 1});
  CHECK(YearMonth::parse("2014-12") == YearMonth{2014, 12});
  CHECK(YearMonth{2005, 1}.months_until({2008, 11}) == 46);
}

TEST_CASE("consecutive rows load unmasked") {
  const auto s = parse("year,month,value\n2005,1,65.0\n2005,2,40.0\n");
  REQUIRE(s.size() == 2);
  CHECK(s.available_count() == 2);
  CHECK(*s.values[0] == 65.0);
  CHECK(*s.values[1] == 40.0);
}

TEST_CASE("a skipped month becomes a masked entry") {
  const auto s = parse("year,month,value\n2005,1,65.0\n2005,3,40.0\n");
  REQUIRE(s.size() == 3);
  CHECK(s.mask() == std::vector<bool>{true, false, true});
  CHECK_FALSE(s.at({2005, 2}).has_value());
}

TEST_CASE("a blank value is masked") {
  const auto s = parse("year,month,value\n2005,1,\n2005,2,40\n");
  CHECK(s.mask() == std::vector<bool>{false, true});
}

TEST_CASE("malformed rows name the row number") {
  try {
    parse("year,month,value\n2005,1,65\n2005,x,3\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.row() == 3);
  }
  CHECK_THROWS_AS(parse("year,month,value\n2005,13,1\n"), ParseError);
  CHECK_THROWS_AS(parse("year,month,value\n2005,1,abc\n"), ParseError);
}

TEST_CASE("duplicate months are rejected") {
  CHECK_THROWS_AS(parse("year,month,value\n2005,1,1\n2005,1,2\n"), DuplicateKeyError);
}

TEST_CASE("only millimetres are accepted") {
  std::istringstream in("year,month,value\n2005,1,1\n");
  SeriesDeclaration d = decl();
  d.units = "cms";
  CHECK_THROWS_AS(parse_series(in, d), UnitError);
}

TEST_CASE("write then load round-trips values and mask") {
  const auto& s = test::fixture().observed.front();
  std::ostringstream out1;
  write_series_csv(out1, s);
  std::istringstream in(out1.str());
  const auto back = parse_series(in, SeriesDeclaration{s.lake, s.component, s.source, "mm", {}});
  CHECK(back.values == s.values);
  CHECK(back.start == s.start);
  std::ostringstream out2;
  write_series_csv(out2, back);
  CHECK(out1.str() == out2.str());

  ComponentSeries gappy = parse("year,month,value\n2005,1,1.25\n2005,4,-3\n");
  std::ostringstream g1;
  write_series_csv(g1, gappy);
  std::istringstream gin(g1.str());
  CHECK(parse_series(gin, decl()).mask() == gappy.mask());
}

TEST_CASE("fixture precipitation record has the tabulated length and mean") {
  const auto& s = test::fixture().observed.front();
  REQUIRE(s.lake == "SUP");
  REQUIRE(s.component == Component::P);
  REQUIRE(s.source == 1);
  CHECK(s.size() == 780);
  double sum = 0.0;
  for (const auto& v : s.values) sum += *v;
  CHECK(sum / 780.0 == doctest::Approx(65.53).epsilon(0.001));
}

TEST_CASE("rolling change in storage is the level difference") {
  const auto d = delta_h(levels({100, 110, 105}), Window::rolling(1), {{2005, 1}, 2});
  REQUIRE(d.values.size() == 2);
  CHECK(*d.values[0] == 10.0);
  CHECK(*d.values[1] == -5.0);
}

TEST_CASE("constant levels give zero change for any window") {
  const auto lv = levels(std::vector<double>(25, 183.4));
  for (int w : {1, 5, 12, 24}) {
    const auto d = delta_h(lv, Window::rolling(w), {{2005, 1}, 24});
    CHECK(d.values.size() == static_cast<std::size_t>(24 - w + 1));
    for (const auto& v : d.values) CHECK(*v == 0.0);
  }
}

TEST_CASE("window longer than the span is a span error") {
  CHECK_THROWS_AS(delta_h(levels({100, 110, 105, 120}), Window::rolling(12), {{2005, 1}, 3}), SpanError);
  CHECK_THROWS_AS(delta_h(levels({100, 110}), Window::rolling(1), {{2005, 1}, 2}), SpanError);
}

TEST_CASE("cumulative change is measured from the first level") {
  const auto d = delta_h(levels({100, 110, 105, 120}), Window::cumulative_window(), {{2005, 1}, 3});
  REQUIRE(d.values.size() == 3);
  CHECK(*d.values[0] == 10.0);
  CHECK(*d.values[1] == 5.0);
  CHECK(*d.values[2] == 20.0);
}

TEST_CASE("rolling windows telescope") {
  const auto table = test::fixture_table();
  const auto lv = table.find("SUP", Component::H);
  REQUIRE(lv != nullptr);
  ComponentSeries s = levels({});
  s.values = lv->values;
  const AnalysisSpan span{{2005, 1}, 120};
  for (int w : {1, 6, 12, 30}) {
    const auto a = delta_h(s, Window::rolling(w), span);
    const auto b = delta_h(s, Window::rolling(2 * w), span);
    CHECK(a.values.size() == static_cast<std::size_t>(120 - w + 1));
    for (std::size_t j = 0; j + static_cast<std::size_t>(w) < a.values.size() && j < b.values.size(); ++j) {
      CHECK(*a.values[j] + *a.values[j + static_cast<std::size_t>(w)] == doctest::Approx(*b.values[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("masked levels mask the dependent changes") {
  ComponentSeries s = levels({100, 110, 105});
  s.values[1].reset();
  const auto d = delta_h(s, Window::rolling(1), {{2005, 1}, 2});
  CHECK_FALSE(d.values[0].has_value());
  CHECK_FALSE(d.values[1].has_value());
  const auto d2 = delta_h(s, Window::rolling(2), {{2005, 1}, 2});
  CHECK(*d2.values[0] == 5.0);
}

TEST_CASE("late-starting gauge series is masked before its first month") {
  const auto table = test::fixture_table();
  const auto* q2 = table.find("SUP", Component::Q, 2);
  REQUIRE(q2 != nullptr);
  REQUIRE(q2->values.size() == 120);
  CHECK(q2->masked_count() == 46);
  CHECK_FALSE(q2->values[45].has_value());
  CHECK(q2->values[46].has_value());
  const auto* p1 = table.find("SUP", Component::P, 1);
  CHECK(p1->masked_count() == 0);
  CHECK(table.find("SUP", Component::H)->values.size() == 121);
}

TEST_CASE("series outside the span are dropped with a warning") {
  auto early = parse("year,month,value\n2002,1,1\n2003,12,2\n");
  auto full = test::fixture().observed.front();
  const auto table = align({early, full}, {{2005, 1}, 120});
  CHECK(table.series.size() == 1);
  REQUIRE(table.warnings.size() == 1);
}
