#include <catch_amalgamated.hpp>

#include <filesystem>
#include <sstream>

#include "refplan/schema.hpp"
#include "support/instances.hpp"
#include "support/tempdir.hpp"

using namespace refplan;
using refplan::testing::TempDir;

namespace fs = std::filesystem;

namespace {

const fs::path kDemo = fs::path(REFPLAN_SOURCE_DIR) / "data" / "demo";

// Copy of the demo bundle that a test may corrupt.
fs::path demo_copy(const TempDir& dir) {
  auto dst = dir / "bundle";
  fs::copy(kDemo, dst, fs::copy_options::recursive);
  return dst;
}

void append_line(const fs::path& file, const std::string& line) {
  auto text = refplan::testing::read_file(file);
  if (!text.empty() && text.back() != '\n') text += '\n';
  refplan::testing::write_file(file, text + line + "\n");
}

}  // namespace

TEST_CASE("demo bundle on disk matches the generator") {
  CHECK(load_instance(kDemo) == refplan::testing::demo_instance());
}

TEST_CASE("write then load reproduces the instance") {
  TempDir dir;
  auto inst = refplan::testing::demo_instance();
  write_instance(inst, dir.path());
  CHECK(load_instance(dir.path()) == inst);

  auto tiny = refplan::testing::random_tiny_instance(7).inst;
  TempDir dir2;
  write_instance(tiny, dir2.path());
  CHECK(load_instance(dir2.path()) == tiny);
}

TEST_CASE("demo instance passes the semantic checks") {
  auto diags = validate_instance(refplan::testing::demo_instance());
  for (const auto& d : diags) INFO(format(d));
  CHECK_FALSE(has_errors(diags));
}

TEST_CASE("malformed number reports file and line") {
  TempDir dir;
  auto b = demo_copy(dir);
  // Line 3 of the table (header is line 1) gets a non-numeric bound.
  auto text = refplan::testing::read_file(b / "FV.csv");
  std::istringstream in(text);
  std::string out, line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (n == 3) line = line.substr(0, line.rfind(',')) + ",abc";
    out += line + "\n";
  }
  refplan::testing::write_file(b / "FV.csv", out);
  try {
    load_instance(b);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(e.file().find("FV.csv") != std::string::npos);
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
}

TEST_CASE("undeclared stream is a reference error") {
  TempDir dir;
  auto b = demo_copy(dir);
  append_line(b / "IU.csv", "BD,NOPE");
  CHECK_THROWS_AS(load_instance(b), ReferenceError);
}

TEST_CASE("unit declared under two kinds") {
  TempDir dir;
  auto b = demo_copy(dir);
  append_line(b / "U_MIX.csv", "CDU1");
  CHECK_THROWS_AS(load_instance(b), UnitKindConflict);
}

TEST_CASE("missing manifest and unknown table") {
  TempDir dir;
  CHECK_THROWS_AS(load_instance(dir.path()), ParseError);
  auto b = demo_copy(dir);
  append_line(b / "manifest.csv", "NOT_A_TABLE,x.csv");
  CHECK_THROWS_AS(load_instance(b), ParseError);
}

TEST_CASE("summary counts of the demo") {
  auto inst = refplan::testing::demo_instance();
  auto c = instance_summary(inst);
  CHECK(c.periods == inst.periods.size());
  CHECK(c.streams == inst.streams.size());
  CHECK(c.units() == inst.units.size());
  CHECK(c.units_by_kind.at(UnitKind::cdu) == 1);
  CHECK(c.delta_base_units == inst.units_of(UnitKind::delta_base).size());
  CHECK(c.tracked_qualities == inst.sq.size());
}

TEST_CASE("defaults for undeclared bounds") {
  auto inst = refplan::testing::demo_instance();
  auto f = inst.flow("NO_SUCH_STREAM", inst.periods.front());
  CHECK(f.lo == 0.0);
  CHECK(f.hi == kInf);
  auto l = inst.inventory("NO_SUCH_STREAM", inst.periods.front());
  CHECK(l.lo == 0.0);
  CHECK(l.hi == 0.0);
  CHECK(Bounds{1.0, 2.0}.contains(2.0 + 1e-9, 1e-8));
  CHECK_FALSE(Bounds{1.0, 2.0}.contains(2.1));
}
