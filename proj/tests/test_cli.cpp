#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "config.hpp"
#include "pipelines.hpp"
#include "report.hpp"

using namespace fedscale;
using namespace fedscale::cli;

namespace {

const std::filesystem::path kConfigs = FEDSCALE_CONFIG_DIR;

ExperimentConfig parse(const std::string& text) { return parse_config(text, kConfigs); }

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(FEDSCALE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::filesystem::path scratch(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("fedscale_test_cli_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

double cell(const Table& t, std::size_t row, const std::string& column)
{
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
        if (t.columns[i] == column) {
            return std::get<double>(t.rows.at(row)[i]);
        }
    }
    throw std::out_of_range("no column " + column);
}

bool flag(const Table& t, std::size_t row, const std::string& column)
{
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
        if (t.columns[i] == column) {
            return std::get<bool>(t.rows.at(row)[i]);
        }
    }
    throw std::out_of_range("no column " + column);
}

} // namespace

// --- config parsing --------------------------------------------------------

TEST(Config, EmptyDocumentGivesDefaults)
{
    const ExperimentConfig c = parse("");
    EXPECT_EQ(c.plan.clients, 10);
    EXPECT_DOUBLE_EQ(c.plan.batch, 1024.0);
    EXPECT_DOUBLE_EQ(c.plan.rounds, 9e5);
    EXPECT_EQ(c.grid.clients.size(), 8u);
    EXPECT_EQ(c.variant, Variant::Appendix);
    EXPECT_EQ(c.geometry.dim(), 4);
}

TEST(Config, RejectsUnknownKeys)
{
    EXPECT_THROW(parse("[plan]\nbatchsize = 10\n"), ConfigError);
    EXPECT_THROW(parse("pipeline_name = 'x'\n"), ConfigError);
}

TEST(Config, RejectsBadValues)
{
    EXPECT_THROW(parse("variant = 'both'\n"), ConfigError);
    EXPECT_THROW(parse("[plan]\ndelta = 1.5\n"), ConfigError);
    EXPECT_THROW(parse("[grid]\nclients = []\n"), ConfigError);
    EXPECT_THROW(parse("[grid]\ngammas = [1.0]\n"), ConfigError);
    EXPECT_THROW(parse("[plan]\nclients = 2.5\n"), ConfigError);
    EXPECT_THROW(parse("[plan\n"), ConfigError);
}

TEST(Config, GeometrySources)
{
    EXPECT_THROW(parse("[geometry]\nhessian = [[1.0]]\nhessian_eigenvalues = [1.0]\nnoise_eigenvalues = [1.0]\n"),
                 ConfigError);
    EXPECT_THROW(parse("[geometry]\nhessian = [[1.0, 2.0], [0.0, 1.0]]\nnoise_cov = [[1.0, 0.0], [0.0, 1.0]]\n"),
                 ConfigError);
    EXPECT_THROW(parse("[geometry]\nhessian = [[1.0]]\n"), ConfigError);
    EXPECT_THROW(parse("[geometry]\nfile = 'missing.json'\n"), ConfigError);

    const ExperimentConfig inline_cov = parse("[geometry]\nhessian = [[2.0, 0.5], [0.5, 1.0]]\n"
                                              "noise_cov = [[1.0, 0.2], [0.2, 0.5]]\n");
    EXPECT_EQ(inline_cov.geometry.dim(), 2);
    EXPECT_NEAR(inline_cov.geometry.noise_cov()(0, 1), 0.2, 1e-15);

    const ExperimentConfig from_file = load_config(kConfigs / "size_finite.toml");
    EXPECT_EQ(from_file.geometry.dim(), 3);
    EXPECT_DOUBLE_EQ(from_file.geometry.hessian()(0, 1), 0.3);
}

TEST(Config, ShippedConfigsParse)
{
    for (const auto& entry : std::filesystem::directory_iterator(kConfigs)) {
        if (entry.path().extension() == ".toml") {
            EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
        }
    }
}

// --- output formatting -----------------------------------------------------

TEST(Report, DoubleFormatting)
{
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
    EXPECT_EQ(format_double(1.0), "1");
    EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
    EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-inf");
    EXPECT_EQ(std::stod(format_double(0.38006545520581756)), 0.38006545520581756);
}

TEST(Report, CsvUsesLfAndHeader)
{
    const auto dir = scratch("csv");
    std::filesystem::create_directories(dir);
    Table t{{"a", "b"}, {}};
    t.add({1.5, std::string("x")});
    t.add({std::int64_t{3}, true});
    write_csv(dir / "t.csv", t);
    EXPECT_EQ(slurp(dir / "t.csv"), "a,b\n1.5,x\n3,true\n");
    EXPECT_THROW(t.add({1.0}), std::logic_error);
}

// --- pipelines -------------------------------------------------------------

TEST(Pipelines, GapExampleAppearsVerbatim)
{
    const PipelineOutput out = run_gap_analysis(load_config(kConfigs / "gap.toml"));
    ASSERT_EQ(out.results.rows.size(), 1u);
    EXPECT_DOUBLE_EQ(cell(out.results, 0, "gap"), 0.38006545520581756);
    EXPECT_TRUE(flag(out.results, 0, "appendix_holds"));
    EXPECT_EQ(out.exit_code, 0);
}

TEST(Pipelines, GapGridSingleClientCellsVanish)
{
    const ExperimentConfig c = load_config(kConfigs / "gap_grid.toml");
    const PipelineOutput out = run_gap_analysis(c);
    EXPECT_EQ(out.results.rows.size(), 75u);
    EXPECT_EQ(out.exit_code, 0);
    for (std::size_t r = 0; r < out.results.rows.size(); ++r) {
        if (std::get<std::int64_t>(out.results.rows[r][0]) == 1) {
            EXPECT_LE(std::abs(cell(out.results, r, "gap")), 1e-14);
            EXPECT_FALSE(flag(out.results, r, "sign_checked"));
        }
        if (!flag(out.results, r, "appendix_holds")) {
            EXPECT_FALSE(flag(out.results, r, "sign_checked"));
        }
    }
}

TEST(Pipelines, SizeVsClientsRecoversSlope)
{
    const PipelineOutput out = run_size_vs_clients(parse("variant = 'main'\n[size]\ngamma = 1.4\n"));
    EXPECT_EQ(out.results.rows.size(), 8u);
    EXPECT_NEAR(out.summary["fit"]["slope"].get<double>(), -0.4, 1e-6);
    EXPECT_GT(out.summary["fit"]["r_squared"].get<double>(), 1.0 - 1e-9);
    EXPECT_TRUE(out.summary["d_fed_monotone_decreasing"].get<bool>());
    EXPECT_NEAR(out.summary["fit"]["rho_hat"].get<double>(), 1.0, 1e-6);
}

TEST(Pipelines, SizeVsClientsAppendixShapeIsMonotone)
{
    const PipelineOutput out = run_size_vs_clients(parse(""));
    EXPECT_TRUE(out.summary["d_fed_monotone_decreasing"].get<bool>());
    EXPECT_NEAR(out.summary["fit"]["slope"].get<double>(), -0.4, 1e-3);
}

TEST(Pipelines, SizeVsClientsSingleClientCountSkipsFit)
{
    const PipelineOutput out = run_size_vs_clients(parse("[grid]\nclients = [10]\n"));
    EXPECT_EQ(out.results.rows.size(), 1u);
    EXPECT_TRUE(out.summary["fit"].is_null());
    EXPECT_EQ(out.exit_code, 0);
}

TEST(Pipelines, SizeVsClientsFiniteModeMatchesOracle)
{
    const PipelineOutput out = run_size_vs_clients(load_config(kConfigs / "size_finite.toml"));
    for (std::size_t r = 0; r < out.results.rows.size(); ++r) {
        ASSERT_TRUE(flag(out.results, r, "d_fed_valid"));
        EXPECT_LT(cell(out.results, r, "oracle_rel_error"), 1e-5);
    }
}

TEST(Pipelines, SizeVsClientsFlagsInvalidPoints)
{
    // n = 100 leaves 600 samples per client, below the batch of 1024.
    const PipelineOutput out = run_size_vs_clients(parse("[grid]\nclients = [10, 100]\n"));
    ASSERT_EQ(out.results.rows.size(), 2u);
    EXPECT_TRUE(flag(out.results, 0, "d_fed_valid"));
    EXPECT_FALSE(flag(out.results, 1, "d_fed_valid"));
    EXPECT_EQ(out.exit_code, 0);
}

TEST(Pipelines, ClientAverage)
{
    const PipelineOutput out = run_client_average(load_config(kConfigs / "client_average.toml"));
    ASSERT_EQ(out.results.rows.size(), 3u);
    EXPECT_EQ(out.exit_code, 0);
    EXPECT_NEAR(cell(out.results, 0, "discrepancy"), cell(out.results, 0, "kappa") - 1.0, 1e-12);
    EXPECT_LT(std::abs(cell(out.results, 1, "discrepancy")), 0.02);
    EXPECT_LE(cell(out.results, 1, "identity_rel_error"), 1e-10);
    EXPECT_EQ(cell(out.results, 2, "kappa"), 1.0);
    EXPECT_EQ(cell(out.results, 2, "discrepancy"), 0.0);
}

TEST(Pipelines, BoundSweepRowsCarryFlags)
{
    const PipelineOutput out = run_bound_sweep(load_config(kConfigs / "bound_sweep.toml"));
    EXPECT_EQ(out.results.rows.size(), 4u * 11u * 2u);
    const auto& cols = out.results.columns;
    EXPECT_NE(std::find(cols.begin(), cols.end(), "valid"), cols.end());
    EXPECT_NE(std::find(cols.begin(), cols.end(), "variant"), cols.end());
    EXPECT_EQ(out.summary["optima"].size(), 8u);
}

TEST(Pipelines, McValidateZeroNoiseIsExact)
{
    const PipelineOutput out = run_mc_validate(parse("[mc]\nfixtures = ['zero-noise']\n"));
    EXPECT_EQ(out.exit_code, 0);
    for (std::size_t r = 0; r < out.results.rows.size(); ++r) {
        EXPECT_EQ(cell(out.results, r, "monte_carlo"), 0.0);
        EXPECT_EQ(cell(out.results, r, "analytic"), 0.0);
    }
}

TEST(Pipelines, ResultsIndependentOfJobs)
{
    const std::string base = "[mc]\nsamples = 40000\nreplicas = 4\nfedavg_rounds = 2000\nfedavg_replicas = 2\n"
                             "[population]\nseeds = 12\n";
    ExperimentConfig one = parse(base);
    ExperimentConfig many = parse(base);
    one.jobs = 1;
    many.jobs = 3;
    for (Pipeline p : {Pipeline::McValidate, Pipeline::HeteroStudy}) {
        EXPECT_EQ(table_json(run_pipeline(p, one).results).dump(), table_json(run_pipeline(p, many).results).dump())
            << to_string(p);
    }
}

TEST(Pipelines, HeteroStudyPsiDecreasesWithAlpha)
{
    const PipelineOutput out = run_hetero_study(load_config(kConfigs / "hetero.toml"));
    EXPECT_TRUE(out.summary["psi_sq_non_increasing_in_alpha"].get<bool>());
    EXPECT_EQ(out.results.rows.size(), 5u);
}

// --- binary ----------------------------------------------------------------

TEST(Binary, ExitCodes)
{
    const auto dir = scratch("exit");
    EXPECT_EQ(run_cli("gap-analysis --config " + (kConfigs / "gap.toml").string() + " --out " + dir.string()), 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "results.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "results.json"));
    EXPECT_TRUE(std::filesystem::exists(dir / "metadata.json"));
    EXPECT_TRUE(std::filesystem::exists(dir / "plotdata" / "gap_vs_clients.csv"));

    EXPECT_EQ(run_cli("gap-analysis --variant sideways --out " + dir.string()), 2);
    EXPECT_EQ(run_cli("gap-analysis --config /nonexistent.toml --out " + dir.string()), 2);
    EXPECT_EQ(run_cli("no-such-pipeline"), 2);
    EXPECT_EQ(run_cli(""), 2);

    const auto bad = dir / "bad.toml";
    std::ofstream(bad) << "[plan]\nrounds = -3\n";
    EXPECT_EQ(run_cli("bound-sweep --config " + bad.string() + " --out " + dir.string()), 2);
}

TEST(Binary, OverridesReachOutput)
{
    const auto dir = scratch("override");
    ASSERT_EQ(run_cli("size-vs-clients --seed 99 --variant main --out " + dir.string()), 0);
    const auto j = nlohmann::json::parse(slurp(dir / "results.json"));
    EXPECT_EQ(j["seed"].get<std::uint64_t>(), 99u);
    EXPECT_EQ(j["variant"].get<std::string>(), "main");
    EXPECT_EQ(j["rows"][0]["variant"].get<std::string>(), "main");
    const auto meta = nlohmann::json::parse(slurp(dir / "metadata.json"));
    EXPECT_EQ(meta["version"].get<std::string>(), kVersion);
    EXPECT_TRUE(meta.contains("elapsed_seconds"));
}
