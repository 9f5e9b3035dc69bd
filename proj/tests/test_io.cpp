#include <catch_amalgamated.hpp>

#include <sstream>

#include "refplan/formulation.hpp"
#include "refplan/io.hpp"
#include "refplan/relaxation.hpp"
#include "refplan/solver.hpp"
#include "support/instances.hpp"
#include "support/tempdir.hpp"

using namespace refplan;
using refplan::testing::TempDir;
using Catch::Approx;

namespace {

std::vector<std::string> section(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string line;
  bool inside = false;
  while (std::getline(in, line)) {
    bool header = !line.empty() && line[0] != ' ';
    if (header) {
      inside = line.rfind(name, 0) == 0;
      continue;
    }
    if (inside) out.push_back(line);
  }
  return out;
}

AlgebraicModel one_variable() {
  AlgebraicModel m;
  auto x = add_variable(m, VarKind::FVI, {"x"}, "", {0.0, 10.0});
  Constraint c;
  c.family = "cap";
  c.sense = Sense::le;
  c.expr.add(1.0, x).add(-1.0);
  add_constraint(m, c);
  m.objective.add(1.0, x);
  return m;
}

}  // namespace

TEST_CASE("single-variable model writes the minimal sections") {
  auto text = mps_text(one_variable());
  auto rows = section(text, "ROWS");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].find(" N ") == 0);
  CHECK(rows[1].find(" L ") == 0);
  auto bounds = section(text, "BOUNDS");
  REQUIRE(bounds.size() == 1);
  CHECK(bounds[0].find(" UP ") == 0);
  auto mps = parse_mps(text);
  CHECK(mps.columns.size() == 1);
  CHECK(mps.entries.size() == 1);
  CHECK(mps.maximize);
  CHECK(mps.rhs == std::vector<double>{1.0});
  CHECK(mps.hi == std::vector<double>{10.0});
  CHECK(text.find("OBJSENSE") != std::string::npos);
  CHECK(text.rfind("ENDATA\n") == text.size() - 7);
}

TEST_CASE("negated objective drops the sense section") {
  ExportOptions o;
  o.sense = ObjectiveSense::negate;
  auto text = mps_text(one_variable(), o);
  CHECK(text.find("OBJSENSE") == std::string::npos);
  auto mps = parse_mps(text);
  CHECK_FALSE(mps.maximize);
  CHECK(mps.objective == std::vector<double>{-1.0});
}

TEST_CASE("binaries are wrapped in integer markers") {
  auto m = one_variable();
  add_variable(m, VarKind::X, {"flag"}, "t1", {0.0, 1.0}, true);
  auto text = mps_text(m);
  CHECK(text.find("'MARKER'") != std::string::npos);
  CHECK(text.find("'INTORG'") != std::string::npos);
  CHECK(text.find("'INTEND'") != std::string::npos);
  CHECK(text.find("'INTORG'") < text.find("'INTEND'"));
  auto mps = parse_mps(text);
  CHECK(mps.integer == std::vector<bool>{false, true});
}

TEST_CASE("bilinear models cannot be written") {
  AlgebraicModel m = one_variable();
  m.constraints[0].expr.add(1.0, 0, 0);
  CHECK_THROWS_AS(mps_text(m), ExportError);
  CHECK_THROWS_AS(lp_text(m), ExportError);
}

TEST_CASE("mangled names are injective and short") {
  VarKey a{VarKind::FVI, {"a_b"}, "t1"};
  VarKey b{VarKind::FVI, {"a", "b"}, "t1"};
  VarKey c{VarKind::FVI, {"a.b"}, "t1"};
  VarKey d{VarKind::FVI, {"ax2eb"}, "t1"};
  std::set<std::string> names{mangle(a), mangle(b), mangle(c), mangle(d)};
  CHECK(names.size() == 4);
  for (const auto& n : names)
    for (char ch : n) CHECK((std::isalnum(static_cast<unsigned char>(ch)) || ch == '_'));

  VarKey long_a{VarKind::FVM, {std::string(400, 'A'), "1"}, "t1"};
  VarKey long_b{VarKind::FVM, {std::string(400, 'A'), "2"}, "t1"};
  CHECK(mangle(long_a).size() <= 255);
  CHECK(mangle(long_a) != mangle(long_b));
}

TEST_CASE("export is byte-identical for identical models") {
  auto model = relax(build_model(refplan::testing::demo_instance()));
  CHECK(mps_text(model) == mps_text(model));
  CHECK(lp_text(model) == lp_text(model));
  TempDir dir;
  write_model(model, dir / "a.mps");
  write_model(model, dir / "b.mps");
  CHECK(refplan::testing::read_file(dir / "a.mps") == refplan::testing::read_file(dir / "b.mps"));
  CHECK(std::filesystem::exists(dir / "a.mps.names.csv"));
  ExportOptions lp;
  lp.format = ExportFormat::lp;
  write_model(model, dir / "a.lp", lp);
  CHECK(refplan::testing::read_file(dir / "a.lp") == lp_text(model));
}

TEST_CASE("relaxation read back keeps statistics and optimum") {
  auto model = relax(build_model(refplan::testing::demo_instance()), {RelaxationMode::mccormick, 1, 3});
  auto back = parse_mps(mps_text(model));
  CHECK(mps_statistics(back) == model_statistics(model));
  CHECK(back.columns.size() == model.variables.size());
  CHECK(back.rows.size() == model.constraints.size());
}

TEST_CASE("malformed MPS lines carry their line number") {
  std::string text =
      "NAME          T\n"
      "ROWS\n"
      " N  obj\n"
      " Q  r1\n"
      "COLUMNS\n"
      "ENDATA\n";
  try {
    parse_mps(text, "bad.mps");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
    CHECK(e.file() == "bad.mps");
  }
  std::string unknown_row =
      "NAME T\nROWS\n N obj\n L r1\nCOLUMNS\n    x  r2  1\nRHS\nBOUNDS\nENDATA\n";
  try {
    parse_mps(unknown_row, "u.mps");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 6);
  }
}

TEST_CASE("free-format bounds and ranges are understood") {
  std::string text =
      "NAME T\n"
      "ROWS\n"
      " N obj\n"
      " G r1\n"
      " E r2\n"
      "COLUMNS\n"
      "    x obj 1 r1 2\n"
      "    y r2 1\n"
      "    MARKER 'MARKER' 'INTORG'\n"
      "    z r1 1\n"
      "    MARKER 'MARKER' 'INTEND'\n"
      "RHS\n"
      "    RHS r1 3 r2 4\n"
      "RANGES\n"
      "    RNG r1 5\n"
      "BOUNDS\n"
      " UP BND x -2\n"
      " FR BND y\n"
      " BV BND z\n"
      "ENDATA\n";
  auto m = parse_mps(text);
  REQUIRE(m.columns == std::vector<std::string>{"x", "y", "z"});
  CHECK(m.lo[0] == -kInf);
  CHECK(m.hi[0] == -2.0);
  CHECK(m.lo[1] == -kInf);
  CHECK(m.hi[1] == kInf);
  CHECK(m.integer[2]);
  CHECK(m.hi[2] == 1.0);
  CHECK(m.range[0] == 5.0);
  CHECK(m.rhs == std::vector<double>{3.0, 4.0});
  CHECK(m.entries.size() == 3);
}

TEST_CASE("solutions round trip losslessly") {
  PlanSolution p;
  p.source = "demo";
  p.solver = "slp";
  p.timestamp = "2024-01-01T00:00:00Z";
  p.set({VarKind::FVI, {"S1"}, "P1"}, 0.1 + 0.2);
  p.set({VarKind::FQ, {"S1", "SUL"}, "P1"}, 1.0 / 3.0);
  p.set({VarKind::FVM, {"CDU1", "M1", "S|x"}, "P2"}, -1e-300);
  p.set({VarKind::L, {"S2"}, "P2"}, 123456789.123456789);
  TempDir dir;
  write_solution(p, dir / "plan.csv");
  auto q = read_solution(dir / "plan.csv");
  CHECK(q.values == p.values);
  CHECK(q.source == p.source);
  CHECK(q.solver == p.solver);
  CHECK(q.timestamp == p.timestamp);
}

TEST_CASE("solution rows naming unknown variables are located") {
  auto model = build_model(refplan::testing::demo_instance());
  TempDir dir;
  refplan::testing::write_file(dir / "plan.csv",
                               "kind,index,period,value\n"
                               "FVI,C1,P1,10\n"
                               "FVI,NOPE,P1,3\n");
  try {
    read_solution(dir / "plan.csv", model);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  refplan::testing::write_file(dir / "bad.csv", "kind,index,period,value\nFVI,C1,P1,ten\n");
  try {
    read_solution(dir / "bad.csv");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}
