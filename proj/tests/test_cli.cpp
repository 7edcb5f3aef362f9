#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "macroqed/cli/scenario.hpp"

using namespace macroqed;
using macroqed::cli::json;

namespace {

std::string validation_message(const json& config) {
    try {
        cli::validate(config);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return "";
}

json kk_config() {
    return json::parse(R"({"scenario": "kk-check", "length_unit": "c_over_omega_T",
        "params": {"medium": {"model": "lorentz", "omega_p": 0.46, "gamma": 0.05}},
        "sweep": {"variable": "omega", "start": 0.2, "stop": 2.0, "points": 12}})");
}

std::string csv_of(const cli::ResultTable& t) {
    std::ostringstream os;
    cli::write_csv(os, t);
    return os.str();
}

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
    const auto p = std::filesystem::temp_directory_path() / ("macroqed_test_" + name);
    std::ofstream(p) << text;
    return p;
}

int run_tool(const std::string& args) {
    const std::string cmd = std::string(MACROQED_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Validate, MissingMediumFieldIsNamed) {
    auto c = kk_config();
    c["params"]["medium"].erase("gamma");
    const auto msg = validation_message(c);
    EXPECT_NE(msg.find("params.medium.gamma"), std::string::npos) << msg;
}

TEST(Validate, NegativeRadiusIsOutOfRange) {
    const auto c = json::parse(R"({"scenario": "decay-spectrum", "length_unit": "lambda_A",
        "params": {"medium": {"model": "lorentz", "omega_p": 0.46, "gamma": 0.05},
                   "geometry": "real-cavity", "R": -0.02, "omega_A": 1.0}})");
    const auto msg = validation_message(c);
    EXPECT_NE(msg.find("params.R"), std::string::npos) << msg;
    EXPECT_NE(msg.find("positive"), std::string::npos) << msg;
}

TEST(Validate, CollectsEveryError) {
    auto c = kk_config();
    c["params"]["medium"]["gamma"] = -1;
    c["params"]["bogus"] = 1;
    c["extra"] = true;
    const auto msg = validation_message(c);
    EXPECT_NE(msg.find("params.medium.gamma"), std::string::npos) << msg;
    EXPECT_NE(msg.find("params.bogus"), std::string::npos) << msg;
    EXPECT_NE(msg.find("extra"), std::string::npos) << msg;
}

TEST(Validate, RejectsNonIncreasingSweep) {
    auto c = kk_config();
    c["sweep"] = json::parse(R"({"variable": "omega", "values": [0.5, 0.4, 0.6]})");
    EXPECT_NE(validation_message(c).find("sweep"), std::string::npos);
    c["sweep"] = json::parse(R"({"variable": "medium", "values": [0.5, 0.6]})");
    EXPECT_FALSE(validation_message(c).empty());
}

TEST(Validate, LengthUnitRequiresOmegaA) {
    auto c = kk_config();
    c["length_unit"] = "lambda_A";
    EXPECT_FALSE(validation_message(c).empty());
    c["length_unit"] = "furlongs";
    EXPECT_FALSE(validation_message(c).empty());
}

TEST(Validate, ParseErrorReportsLine) {
    try {
        cli::validate_text("{\n \"scenario\": \"kk-check\",\n oops\n}");
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(Validate, ShippedScenariosAreValid) {
    for (const auto& entry : std::filesystem::directory_iterator(MACROQED_SCENARIOS)) {
        std::ifstream in(entry.path());
        std::stringstream ss;
        ss << in.rdbuf();
        EXPECT_NO_THROW(cli::validate_text(ss.str())) << entry.path();
    }
}

TEST(Validate, ResonatorConfigResolvesUnits) {
    std::ifstream in(std::string(MACROQED_SCENARIOS) + "/fig6_dynamics.json");
    std::stringstream ss;
    ss << in.rdbuf();
    const auto sc = cli::validate_text(ss.str());
    EXPECT_EQ(sc.kind, "decay-dynamics");
    EXPECT_DOUBLE_EQ(sc.params.at("omega_A").get<double>(), 1.046448);
    EXPECT_DOUBLE_EQ(to_internal_length(sc.params.at("R2").get<double>(), sc.length_unit, 1.046448),
                     30 * 2 * std::numbers::pi);
}

TEST(Run, ThreadCountDoesNotChangeOutput) {
    const auto sc = cli::validate(kk_config());
    const auto one = csv_of(cli::run(sc, 1));
    EXPECT_EQ(one, csv_of(cli::run(sc, 1)));
    EXPECT_EQ(one, csv_of(cli::run(sc, 3)));
}

TEST(Run, CsvLayout) {
    const auto t = cli::run(cli::validate(kk_config()));
    const auto text = csv_of(t);
    EXPECT_EQ(text.rfind("# tool: macroqed ", 0), 0u);
    EXPECT_NE(text.find("\nomega,"), std::string::npos);
    EXPECT_EQ(t.rows.size(), 12u);
    for (const auto& c : t.columns) EXPECT_EQ(c.find(' '), std::string::npos);
}

TEST(Run, ComplexColumnsAreSplit) {
    const auto c = json::parse(R"({"scenario": "slab-matrices", "length_unit": "c_over_omega_T",
        "params": {"medium": {"model": "lorentz", "omega_p": 0.46, "gamma": 0.05}, "l": 1.0, "omega": 1.0}})");
    const auto t = cli::run(cli::validate(c));
    bool re = false, im = false;
    for (const auto& col : t.columns) {
        re |= col.ends_with("_re");
        im |= col.ends_with("_im");
    }
    EXPECT_TRUE(re && im);
}

TEST(Run, CsvRoundTripReproducesScenario) {
    const auto sc = cli::validate(kk_config());
    const auto text = csv_of(cli::run(sc));
    std::istringstream in(text);
    const auto back = cli::scenario_from_csv(in);
    EXPECT_EQ(back.kind, sc.kind);
    EXPECT_EQ(back.params, sc.params);
    EXPECT_EQ(back.sweep.values, sc.sweep.values);
    EXPECT_EQ(csv_of(cli::run(back)), text);
}

TEST(Binary, ExitCodes) {
    const auto good = write_temp("good.json", kk_config().dump());
    auto bad_cfg = kk_config();
    bad_cfg["params"]["medium"]["omega_p"] = "x";
    const auto bad = write_temp("bad.json", bad_cfg.dump());
    const auto stuck = write_temp("stuck.json", R"({"scenario": "entanglement-degradation",
        "length_unit": "c_over_omega_T",
        "params": {"absorption_length": 1, "l": 0.5, "restarts": 1, "terms": 4, "max_evaluations": 400}})");
    const auto out = std::filesystem::temp_directory_path() / "macroqed_test_out.csv";

    EXPECT_EQ(run_tool("list-scenarios"), 0);
    EXPECT_EQ(run_tool("validate " + good.string()), 0);
    EXPECT_EQ(run_tool("run " + good.string() + " --out " + out.string() + " --threads 2"), 0);
    EXPECT_TRUE(std::filesystem::exists(out));
    EXPECT_EQ(run_tool("validate " + bad.string()), 2);
    EXPECT_EQ(run_tool("run " + bad.string()), 2);
    EXPECT_EQ(run_tool("run /nonexistent/config.json"), 2);
    EXPECT_EQ(run_tool("run " + good.string() + " --threads 0"), 2);
    EXPECT_EQ(run_tool("frobnicate"), 2);
    EXPECT_EQ(run_tool("run " + stuck.string()), 3);
}

TEST(Binary, ListsEveryScenario) {
    const auto listing = cli::list_scenarios();
    for (const auto& def : cli::scenario_defs()) EXPECT_NE(listing.find(def.kind), std::string::npos);
    EXPECT_EQ(cli::scenario_defs().size(), 8u);
}
