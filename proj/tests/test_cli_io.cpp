#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "crvsadj/cli_io.hpp"
#include "crvsadj/rng.hpp"

using namespace crvsadj;
namespace fs = std::filesystem;

namespace {

fs::path test_dir() {
  const fs::path dir = fs::temp_directory_path() / "crvsadj_io_test";
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// the observation mix reported by the study compilation: mostly bare true
// maternal counts, a handful of breakdowns
std::vector<StudyObservation> census_dataset() {
  std::vector<StudyObservation> studies;
  Rng rng(123);
  const auto add = [&](StudyKind kind, int copies) {
    for (int i = 0; i < copies; ++i) {
      StudyObservation obs;
      obs.country = "C" + std::to_string(static_cast<int>(rng.uniform(0, 33)));
      obs.t1 = 1990 + static_cast<int>(rng.uniform(0, 20));
      obs.t2 = obs.t1 + static_cast<int>(rng.uniform(0, 5));
      obs.kind = kind;
      obs.z_crvs = 1000 + static_cast<std::int64_t>(rng.uniform(0, 9000));
      obs.z_matcrvs = static_cast<std::int64_t>(rng.uniform(10, 100));
      switch (kind) {
        case StudyKind::TruematCrvsOnly:
          obs.z_truemat_crvs = static_cast<std::int64_t>(rng.uniform(10, 150));
          break;
        case StudyKind::TruematAndUplus:
          obs.z_truemat = static_cast<std::int64_t>(rng.uniform(10, 150));
          obs.z_unreg = static_cast<std::int64_t>(rng.uniform(0, 500));
          break;
        case StudyKind::FminusFplusUplus:
          obs.z_fminus = static_cast<std::int64_t>(rng.uniform(0, 40));
          obs.z_fplus = static_cast<std::int64_t>(rng.uniform(0, obs.z_matcrvs));
          obs.z_uplus = static_cast<std::int64_t>(rng.uniform(0, 20));
          break;
        case StudyKind::FminusFplus:
          obs.z_fminus = static_cast<std::int64_t>(rng.uniform(0, 40));
          obs.z_fplus = static_cast<std::int64_t>(rng.uniform(0, obs.z_matcrvs));
          break;
        case StudyKind::FminusUplus:
          obs.z_fminus = static_cast<std::int64_t>(rng.uniform(0, 40));
          obs.z_uplus = static_cast<std::int64_t>(rng.uniform(0, 20));
          break;
        case StudyKind::FminusOnly:
          obs.z_fminus = static_cast<std::int64_t>(rng.uniform(0, 40));
          break;
      }
      obs.validate();
      studies.push_back(obs);
    }
  };
  add(StudyKind::TruematCrvsOnly, 162);
  add(StudyKind::TruematAndUplus, 2);
  add(StudyKind::FminusFplusUplus, 10);
  add(StudyKind::FminusFplus, 8);
  add(StudyKind::FminusUplus, 1);
  add(StudyKind::FminusOnly, 38);
  return studies;
}

}  // namespace

TEST_CASE("config parsing") {
  const Config cfg = Config::parse_string(
      "# a comment\n"
      "n_chains = 4\n"
      "thin=2  # trailing comment\n"
      "target_accept = 0.3\n"
      "apply_constraints = false\n"
      "name = desk run\n");
  CHECK(cfg.get_int("n_chains", 0) == 4);
  CHECK(cfg.get_int("thin", 0) == 2);
  CHECK(cfg.get_real("target_accept", 0.0) == 0.3);
  CHECK(cfg.get_bool("apply_constraints", true) == false);
  CHECK(cfg.get_string("name", "") == "desk run");
  CHECK(cfg.get_int("missing", 77) == 77);

  CHECK_THROWS_AS(Config::parse_string("not a key value line\n"), DataError);
  CHECK_THROWS_AS(Config::parse_string("n_chains = abc\n").get_int("n_chains", 0),
                  DataError);
}

TEST_CASE("config builds runtime structs") {
  const Config cfg = Config::parse_string(
      "n_chains = 3\nn_iter = 1000\nn_burn = 500\nthin = 5\nseed = 9\n"
      "kappa_n_samples = 2000\nkappa_seed = 4\n"
      "sim_n_countries = 2\nsim_year_start = 2000\nsim_year_end = 2003\n"
      "sim_studies_per_country = 2\nsim_period_length = 2\n");
  const McmcConfig mc = cfg.mcmc();
  CHECK(mc.n_chains == 3);
  CHECK(mc.n_kept_per_chain() == 100);
  CHECK(mc.seed == 9);

  const KappaModel km = cfg.kappa();
  CHECK(km.n_samples == 2000);
  CHECK(km.seed == 4);

  const ScenarioConfig sc = cfg.scenario();
  CHECK(sc.countries.size() == 2u);
  CHECK(sc.countries[0].name == "C01");
  REQUIRE(sc.countries[0].studies.size() == 2u);
  CHECK(sc.countries[0].studies[0].t1 == 2000);
  CHECK(sc.countries[0].studies[0].t2 == 2001);
  CHECK(sc.countries[0].studies[1].t1 == 2002);
  CHECK(sc.countries[0].studies[1].t2 == 2003);
}

TEST_CASE("study kind inference and row-numbered errors") {
  const fs::path dir = test_dir();
  const fs::path path = dir / "studies_bad.csv";

  atomic_write_file(
      path,
      "country,t1,t2,z_crvs,z_matcrvs,z_truemat_crvs,z_truemat,z_fminus,z_fplus,"
      "z_uplus,z_unreg,z_env,z_tot\n"
      "A,2000,2001,100,5,8,,,,,,,\n"
      "B,2000,2000,100,200,8,,,,,,,\n");
  CHECK_THROWS_WITH_AS(parse_studies_csv(path), doctest::Contains("row 3"), DataError);

  atomic_write_file(
      path,
      "country,t1,t2,z_crvs,z_matcrvs,z_truemat_crvs,z_truemat,z_fminus,z_fplus,"
      "z_uplus,z_unreg,z_env,z_tot\n"
      "A,2000,2001,100,5,,,,,,,,\n");
  CHECK_THROWS_WITH_AS(parse_studies_csv(path), doctest::Contains("infer"), DataError);

  // kind inference from the populated columns
  atomic_write_file(
      path,
      "country,t1,t2,z_crvs,z_matcrvs,z_truemat_crvs,z_truemat,z_fminus,z_fplus,"
      "z_uplus,z_unreg,z_env,z_tot\n"
      "A,2000,2001,100,5,8,,,,,,,\n"
      "B,2000,2000,100,5,,9,,,,20,,\n"
      "C,2000,2000,100,5,,,3,2,1,,,\n"
      "D,2000,2000,100,5,,,3,2,,,,\n"
      "E,2000,2000,100,5,,,3,,1,,,\n"
      "F,2000,2000,100,5,,,3,,,,,\n");
  const auto studies = parse_studies_csv(path);
  REQUIRE(studies.size() == 6u);
  CHECK(studies[0].kind == StudyKind::TruematCrvsOnly);
  CHECK(studies[1].kind == StudyKind::TruematAndUplus);
  CHECK(studies[2].kind == StudyKind::FminusFplusUplus);
  CHECK(studies[3].kind == StudyKind::FminusFplus);
  CHECK(studies[4].kind == StudyKind::FminusUplus);
  CHECK(studies[5].kind == StudyKind::FminusOnly);

  // ambiguous combination
  atomic_write_file(
      path,
      "country,t1,t2,z_crvs,z_matcrvs,z_truemat_crvs,z_truemat,z_fminus,z_fplus,"
      "z_uplus,z_unreg,z_env,z_tot\n"
      "A,2000,2001,100,5,8,9,,,,,,\n");
  CHECK_THROWS_WITH_AS(parse_studies_csv(path), doctest::Contains("ambiguous"),
                       DataError);
}

TEST_CASE("census round-trips bit-identically") {
  const fs::path dir = test_dir();
  const auto studies = census_dataset();
  REQUIRE(studies.size() == 221u);

  const fs::path first = dir / "census1.csv";
  const fs::path second = dir / "census2.csv";
  write_studies(first, studies);
  const auto reread = parse_studies_csv(first);
  REQUIRE(reread.size() == studies.size());
  write_studies(second, reread);
  CHECK(slurp(first) == slurp(second));

  for (std::size_t i = 0; i < studies.size(); ++i) {
    CHECK(reread[i].kind == studies[i].kind);
    CHECK(reread[i].z_crvs == studies[i].z_crvs);
    CHECK(reread[i].z_truemat_crvs == studies[i].z_truemat_crvs);
    CHECK(reread[i].z_fminus == studies[i].z_fminus);
  }
}

TEST_CASE("crvs records round trip including real envelopes") {
  const fs::path dir = test_dir();
  std::vector<CrvsYearRecord> records;
  CrvsYearRecord r;
  r.country = "with, comma";
  r.year = 2001;
  r.mat_crvs = 12;
  r.crvs_total = 3456;
  r.who_envelope = 3456.789;
  records.push_back(r);
  r.country = "plain";
  r.year = 1999;
  r.who_envelope = 0.1;  // shortest round-trip formatting
  records.push_back(r);

  const fs::path path = dir / "crvs.csv";
  write_crvs(path, records);
  const auto reread = parse_crvs_csv(path);
  REQUIRE(reread.size() == 2u);
  CHECK(reread[0].country == "with, comma");
  CHECK(reread[0].who_envelope == 3456.789);
  CHECK(reread[1].who_envelope == 0.1);

  const fs::path again = dir / "crvs2.csv";
  write_crvs(again, reread);
  CHECK(slurp(path) == slurp(again));
}

TEST_CASE("json mirror carries the same rows") {
  const fs::path dir = test_dir();
  Table table;
  table.columns = {"a", "b"};
  table.add_row({"1", "x,y"});
  table.add_row({"2", "plain"});
  table.write(dir / "mirror.csv", OutFormat::Json);
  const auto parsed = nlohmann::json::parse(slurp(dir / "mirror.json"));
  REQUIRE(parsed.is_array());
  REQUIRE(parsed.size() == 2u);
  CHECK(parsed[0]["a"] == "1");
  CHECK(parsed[0]["b"] == "x,y");
  CHECK(parsed[1]["b"] == "plain");
}

TEST_CASE("hyper draws table round trips through the reader") {
  PosteriorSamples samples;
  samples.layout.has_hyper = true;
  samples.layout.n_params = 7;
  samples.layout.names = {"eta_world_plus",  "eta_world_minus", "log_sigma_plus",
                          "log_sigma_minus", "log_delta_plus",  "log_delta_minus",
                          "phi"};
  Rng rng(3);
  for (int c = 0; c < 2; ++c) {
    Eigen::MatrixXd chain(5, 7);
    for (int i = 0; i < 5; ++i) {
      for (int k = 0; k < 7; ++k) chain(i, k) = rng.normal();
    }
    samples.chains.push_back(chain);
  }

  const fs::path dir = test_dir();
  const fs::path path = dir / "hyper_draws.csv";
  hyper_draws_table(samples).write(path, OutFormat::Csv);
  const PosteriorSamples reread = read_hyper_draws_csv(path);
  REQUIRE(reread.n_chains() == 2);
  REQUIRE(reread.n_kept() == 5);
  for (int c = 0; c < 2; ++c) {
    CHECK((reread.chains[c] - samples.chains[c]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("summary table parses back") {
  MisclassSummary summary;
  summary.country = "A";
  MisclassSummary::Row row;
  row.year = 2000;
  row.point.lambda_plus = 0.6;
  row.point.lambda_minus = 0.999;
  row.point.v_plus = 0.01;
  row.point.v_minus = 1e-7;
  row.point.u = -1e-5;
  row.point.e_plus = 0.37;
  row.point.e_minus = 1e-6;
  row.data_informed = true;
  summary.rows.push_back(row);
  row.year = 2001;
  row.data_informed = false;
  summary.rows.push_back(row);

  const fs::path dir = test_dir();
  const fs::path path = dir / "country_A.csv";
  country_summary_table(summary).write(path, OutFormat::Csv);
  const auto rows = parse_summary_csv(path);
  REQUIRE(rows.size() == 2u);
  CHECK(rows[0].country == "A");
  CHECK(rows[0].year == 2000);
  CHECK(rows[0].point.lambda_plus == 0.6);
  CHECK(rows[0].point.u == -1e-5);
  CHECK(rows[0].data_informed);
  CHECK_FALSE(rows[1].data_informed);
}

TEST_CASE("atomic write replaces content and leaves no temp file") {
  const fs::path dir = test_dir();
  const fs::path path = dir / "atomic.txt";
  atomic_write_file(path, "first");
  atomic_write_file(path, "second");
  CHECK(slurp(path) == "second");
  CHECK_FALSE(fs::exists(path.string() + ".tmp"));
}
