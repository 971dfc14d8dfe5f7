#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "support.hpp"

namespace fs = std::filesystem;

namespace {

int cli(const std::string& args) {
  const std::string cmd = std::string(L2SWBM_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("command line workflow and exit codes") {
  const fs::path root = l2swbm::test::scratch_dir("cli");
  const fs::path fx = root / "fx";
  const std::string manifest = "--manifest " + (fx / "manifest.json").string();
  const std::string quick = " --k 400 --chains 2 --retain 50 --threads 1 --no-ppc";

  CHECK(cli("") == 2);
  CHECK(cli("frobnicate") == 2);
  REQUIRE(cli("synth --out " + fx.string()) == 0);
  CHECK(cli("synth --out " + fx.string()) == 2);
  CHECK(cli("run " + manifest + " --model 12FF --out " + (root / "r").string()) == 2);  // no priors yet
  REQUIRE(cli("fit-priors " + manifest) == 0);
  CHECK(fs::exists(fx / "priors.json"));
  CHECK(cli("fit-priors " + manifest) == 2);
  CHECK(cli("fit-priors " + manifest + " --force") == 0);

  CHECK(cli("run " + manifest + " --model 13ZZ --out " + (root / "bad").string()) == 2);
  CHECK(cli("run " + manifest + " --model 01NF --k 100 --burn-in 200 --out " + (root / "bad").string()) == 2);
  CHECK(cli("run " + manifest + " --model 01NF --k abc") == 2);

  const fs::path r1 = root / "r1";
  REQUIRE(cli("run " + manifest + " --model 01NF" + quick + " --out " + r1.string()) == 0);
  for (const auto* f : {"manifest.json", "timing.json", "diagnostics.json", "flows.csv", "psrf_trajectory.csv",
                        "samples/Q_SUP_1.csv"}) {
    CAPTURE(f);
    CHECK(fs::exists(r1 / f));
  }
  CHECK(cli("run " + manifest + " --model 01NF" + quick + " --out " + r1.string()) == 2);

  // Interrupt, then resume to the same draws as the uninterrupted run.
  const fs::path r2 = root / "r2";
  CHECK(cli("run " + manifest + " --model 01NF" + quick + " --checkpoint-interval 100 --stop-after 250 --out " +
            r2.string()) == 1);
  REQUIRE(cli("run " + manifest + " --model 01NF" + quick + " --checkpoint-interval 100 --resume --out " +
              r2.string()) == 0);
  const fs::path r3 = root / "r3";
  REQUIRE(cli("run " + manifest + " --model 01NF" + quick + " --checkpoint-interval 100 --out " + r3.string()) == 0);
  CHECK(slurp(r2 / "samples/Q_SUP_1.csv") == slurp(r3 / "samples/Q_SUP_1.csv"));
  CHECK(slurp(r2 / "samples/tau_dH_MHU.csv") == slurp(r3 / "samples/tau_dH_MHU.csv"));

  std::ofstream(root / "design.json") << R"({"models": ["01NF", "f01FF"], "comparisons": [["01NF", "f01FF"]]})";
  const fs::path e = root / "e";
  REQUIRE(cli("experiment " + manifest + " --design " + (root / "design.json").string() + quick + " --out " +
              e.string()) == 0);
  CHECK(fs::exists(e / "comparison_01NF_vs_f01FF.csv"));
  CHECK(fs::exists(e / "models/f01FF/flows.csv"));

  CHECK(cli("dot " + manifest + " --model PROT") == 0);
  CHECK(cli("dot " + manifest + " --model PRO") == 2);
}
