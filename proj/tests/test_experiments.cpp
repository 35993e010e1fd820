#include <doctest/doctest.h>

#include <carnot/experiments.hpp>
#include <carnot/io.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using carnot::io::json;
using carnot::experiments::run_experiment;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        auto stamp = std::random_device{}();
        path = fs::temp_directory_path() /
               ("carnot_exp_test_" + std::to_string(stamp));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

// Checks `doc` against the subset of json-schema the summary schema uses:
// type, required, properties, additionalProperties, enum, const, items.
void schema_violations(const json& schema, const json& doc,
                       const std::string& at, std::vector<std::string>& out) {
    if (schema.contains("const")) {
        if (doc != schema.at("const")) out.push_back(at + ": const mismatch");
        return;
    }
    if (schema.contains("enum")) {
        bool hit = false;
        for (const json& v : schema.at("enum")) hit = hit || doc == v;
        if (!hit) out.push_back(at + ": not in enum");
        return;
    }
    if (schema.contains("type")) {
        const std::string t = schema.at("type").get<std::string>();
        const bool ok = (t == "object" && doc.is_object()) ||
                        (t == "array" && doc.is_array()) ||
                        (t == "string" && doc.is_string()) ||
                        (t == "integer" &&
                         (doc.is_number_integer() || doc.is_number_unsigned()));
        if (!ok) {
            out.push_back(at + ": expected " + t);
            return;
        }
    }
    if (schema.contains("required")) {
        for (const json& k : schema.at("required"))
            if (!doc.contains(k.get<std::string>()))
                out.push_back(at + ": missing " + k.get<std::string>());
    }
    if (doc.is_object()) {
        const json props = schema.value("properties", json::object());
        const bool closed = schema.contains("additionalProperties") &&
                            schema.at("additionalProperties").is_boolean() &&
                            !schema.at("additionalProperties").get<bool>();
        for (const auto& [k, v] : doc.items()) {
            if (props.contains(k)) {
                schema_violations(props.at(k), v, at + "." + k, out);
            } else if (closed) {
                out.push_back(at + ": unexpected key " + k);
            }
        }
    }
    if (doc.is_array() && schema.contains("items")) {
        for (std::size_t i = 0; i < doc.size(); ++i)
            schema_violations(schema.at("items"), doc[i],
                              at + "[" + std::to_string(i) + "]", out);
    }
}

const json& summary_schema() {
    static const json schema = carnot::io::read_json(CARNOT_SCHEMA_PATH);
    return schema;
}

// Runs the experiment into a subdirectory and checks that the returned
// summary, the on-disk summary, and the published schema all agree.
carnot::experiments::RunOutcome run_checked(
    const json& config, const fs::path& out, int threads = 0,
    std::optional<std::uint64_t> seed_override = {},
    const fs::path& config_dir = ".") {
    auto outcome = run_experiment(config, out, threads, seed_override, config_dir);
    json on_disk = carnot::io::read_json(out / "summary.json");
    CHECK(on_disk == outcome.summary);
    std::vector<std::string> bad;
    schema_violations(summary_schema(), outcome.summary, "summary", bad);
    for (const auto& b : bad) FAIL_CHECK(b);
    return outcome;
}

json h1_group() { return json{{"kind", "heisenberg"}, {"n", 1}}; }

json base_config(const std::string& experiment, json params,
                 std::uint64_t seed = 7) {
    return json{{"experiment", experiment},
                {"group", h1_group()},
                {"seed", seed},
                {"params", std::move(params)}};
}

}  // namespace

TEST_CASE("registry lists every experiment with its randomization flag") {
    const auto& infos = carnot::experiments::registry();
    std::set<std::string> names;
    for (const auto& e : infos) {
        CHECK(!e.description.empty());
        names.insert(e.name);
    }
    const std::set<std::string> want = {
        "group-check", "gauge-check",  "calibrate",       "flow-check",
        "polar-check", "giraud-scan",  "boxcount",        "ifs",
        "potential-eval", "divergence-probe", "threshold"};
    CHECK(names == want);
    const std::set<std::string> fixed = {"calibrate", "potential-eval",
                                         "divergence-probe"};
    for (const auto& e : infos)
        CHECK(e.randomized == (fixed.count(e.name) == 0));
}

TEST_CASE("config envelope violations are validation errors") {
    TempDir tmp;
    int i = 0;
    auto expect_invalid = [&](const json& config, const std::string& needle) {
        auto out = tmp.path / ("bad" + std::to_string(i++));
        auto outcome = run_checked(config, out);
        CHECK(outcome.exit_code == 2);
        CHECK(outcome.summary.at("status") == "validation-error");
        REQUIRE(!outcome.summary.at("errors").empty());
        const std::string msg =
            outcome.summary.at("errors")[0].get<std::string>();
        CAPTURE(msg);
        CHECK(msg.find(needle) != std::string::npos);
    };

    expect_invalid(json::array(), "expected a JSON object");
    expect_invalid(json{{"experiment", "group-check"},
                        {"group", h1_group()},
                        {"seed", 1},
                        {"params", json::object()},
                        {"comment", "x"}},
                   "unknown key 'comment'");
    expect_invalid(base_config("does-not-exist", json::object()),
                   "unknown experiment 'does-not-exist'");
    expect_invalid(json{{"experiment", "group-check"},
                        {"group", h1_group()},
                        {"params", json::object()}},
                   "is randomized; 'seed' is required");
    expect_invalid(json{{"experiment", "group-check"},
                        {"group", h1_group()},
                        {"seed", -3},
                        {"params", json::object()}},
                   "'seed' must be a nonnegative integer");
    expect_invalid(json{{"experiment", "group-check"},
                        {"group", h1_group()},
                        {"seed", 1},
                        {"params", json::array()}},
                   "'params' must be an object");
    expect_invalid(json{{"experiment", "group-check"},
                        {"group", json{{"kind", "nope"}}},
                        {"seed", 1},
                        {"params", json::object()}},
                   "kind");
}

TEST_CASE("group-check runs clean and writes its table") {
    TempDir tmp;
    auto outcome = run_checked(
        base_config("group-check", json{{"cases", 2000}}, 11), tmp.path);
    CHECK(outcome.exit_code == 0);
    CHECK(outcome.summary.at("status") == "ok");
    CHECK(outcome.summary.at("seed").get<std::uint64_t>() == 11);
    bool listed = false;
    for (const json& a : outcome.summary.at("artifacts"))
        listed = listed || a.get<std::string>() == "checks.csv";
    CHECK(listed);
    CHECK(fs::exists(tmp.path / "checks.csv"));
    const json& gates = outcome.summary.at("results").at("gates");
    REQUIRE(!gates.empty());
    for (const auto& [name, ok] : gates.items()) {
        CAPTURE(name);
        CHECK(ok.get<bool>());
    }
}

TEST_CASE("divergence-probe flags an unstable tail as an accuracy failure") {
    TempDir tmp;
    // Cutting the cutoff sequence at 1e-5 leaves the far-mass Cauchy gap two
    // decades above the stability tolerance, so the gate must trip.
    auto outcome = run_checked(
        base_config("divergence-probe",
                    json{{"t_mins", {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}}}),
        tmp.path);
    CHECK(outcome.exit_code == 3);
    CHECK(outcome.summary.at("status") == "accuracy-failure");
    const json& r = outcome.summary.at("results");
    CHECK(r.at("gates").at("on_curve_exponent").get<bool>());
    CHECK_FALSE(r.at("gates").at("far_mass_stability").get<bool>());
    // Results stay populated on gate failure.
    CHECK(std::abs(r.at("exponent").get<double>() + 1.0) < 0.05);
    const std::string msg = outcome.summary.at("errors")[0].get<std::string>();
    CHECK(msg.find("far_mass_stability") != std::string::npos);
    CHECK(fs::exists(tmp.path / "partials.csv"));
}

TEST_CASE("giraud-scan rejects exponent pairs outside the integrable range") {
    TempDir tmp;
    json config = base_config(
        "giraud-scan", json{{"a_grid", {2.0}}, {"b_grid", {1.5}}});
    config["group"] = json{{"kind", "euclidean"}, {"n", 3}};
    auto outcome = run_checked(config, tmp.path);
    CHECK(outcome.exit_code == 2);
    CHECK(outcome.summary.at("status") == "validation-error");
    const std::string msg = outcome.summary.at("errors")[0].get<std::string>();
    CHECK(msg.find("a + b < Q") != std::string::npos);
}

TEST_CASE("identical configs and seeds give identical bytes across threads") {
    TempDir tmp;
    const json config = base_config(
        "boxcount",
        json{{"set", "horizontal-segment"},
             {"n_points", 200000},
             {"scales", {0.5, 0.25, 0.1, 0.05, 0.02, 0.008, 0.003, 0.0015,
                         0.00015}},
             {"write_samples", true},
             {"samples_cap", 2000}},
        42);
    auto a = run_checked(config, tmp.path / "a", 1);
    auto b = run_checked(config, tmp.path / "b", 4);
    CHECK(a.exit_code == 0);
    CHECK(b.exit_code == 0);
    for (const char* f : {"summary.json", "cover.json", "samples.csv"}) {
        CAPTURE(f);
        CHECK(read_text(tmp.path / "a" / f) == read_text(tmp.path / "b" / f));
    }

    // A seed override reshuffles the cloud but is itself reproducible.
    auto c = run_checked(config, tmp.path / "c", 2, 999);
    auto d = run_checked(config, tmp.path / "d", 3, 999);
    CHECK(c.summary.at("seed").get<std::uint64_t>() == 999);
    CHECK(read_text(tmp.path / "c" / "samples.csv") !=
          read_text(tmp.path / "a" / "samples.csv"));
    CHECK(read_text(tmp.path / "c" / "samples.csv") ==
          read_text(tmp.path / "d" / "samples.csv"));
    CHECK(read_text(tmp.path / "c" / "summary.json") ==
          read_text(tmp.path / "d" / "summary.json"));
}

TEST_CASE("ifs reports the Moran exponent and separation of the Cantor set") {
    TempDir tmp;
    const double third = 1.0 / 3.0;
    auto outcome = run_checked(
        base_config("ifs",
                    json{{"maps",
                          {{{"translation", {0.0, 0.0, 0.0}}, {"ratio", third}},
                           {{"translation", {2.0 / 3.0, 0.0, 0.0}},
                            {"ratio", third}}}},
                         {"n_points", 4096},
                         {"probe_points", 128}}),
        tmp.path);
    CHECK(outcome.exit_code == 0);
    const json& r = outcome.summary.at("results");
    CHECK(r.at("moran_dim").get<double>() ==
          doctest::Approx(std::log(2.0) / std::log(3.0)).epsilon(1e-12));
    CHECK(r.at("well_separated").get<bool>());
    CHECK(r.at("min_gap").get<double>() > 0.0);

    // Asking for a slope gate without scales to fit is a config error.
    auto bad = run_checked(
        base_config("ifs",
                    json{{"maps",
                          {{{"translation", {0.0, 0.0, 0.0}}, {"ratio", third}},
                           {{"translation", {2.0 / 3.0, 0.0, 0.0}},
                            {"ratio", third}}}},
                         {"n_points", 1024},
                         {"expect", {{"dim", 0.6}, {"band", 0.1}}}}),
        tmp.path / "bad");
    CHECK(bad.exit_code == 2);
}

TEST_CASE("potential-eval reproduces the closed-form kernel of a unit atom") {
    TempDir tmp;
    auto outcome = run_checked(
        base_config("potential-eval",
                    json{{"measure",
                          {{"atoms", {{{0.0, 0.0, 0.0}, 1.0}}},
                           {"density", nullptr}}},
                         {"points", {{1.0, 0.0, 0.0},
                                     {2.0, 0.0, 0.0},
                                     {0.0, 0.0, 0.0}}}},
                    0),
        tmp.path);
    CHECK(outcome.exit_code == 0);
    const json& r = outcome.summary.at("results");
    const double pi = 3.14159265358979323846;
    // Unit atom at the origin: the potential equals the kernel, which is
    // c / d(x)^2 with the closed-form constant c = 1/(2*pi).
    CHECK(r.at("c_gamma").get<double>() ==
          doctest::Approx(1.0 / (2.0 * pi)).epsilon(1e-12));
    CHECK(r.at("n_infinite").get<int>() == 1);
    CHECK(r.at("max_finite").get<double>() ==
          doctest::Approx(1.0 / (2.0 * pi)).epsilon(1e-12));
    CHECK(r.at("min_finite").get<double>() ==
          doctest::Approx(1.0 / (8.0 * pi)).epsilon(1e-12));
    CHECK(r.at("measure_mass").get<double>() == doctest::Approx(1.0));
    CHECK(fs::exists(tmp.path / "potential.csv"));
}

TEST_CASE("potential-eval resolves measure documents relative to the config") {
    TempDir tmp;
    fs::create_directories(tmp.path / "cfg" / "m");
    const fs::path out = tmp.path / "out";

    auto g = carnot::make_heisenberg(1);
    carnot::RadonMeasure mu;
    Eigen::VectorXd a(3);
    a << 0.5, 0.0, 0.0;
    mu.atoms.emplace_back(carnot::point_from_ambient(g, a), 2.5);
    carnot::GridDensity rho;
    rho.origin = Eigen::VectorXd::Constant(3, -1.0);
    rho.spacing = Eigen::VectorXd::Constant(3, 1.0);
    rho.shape = {2, 2, 2};
    rho.values.assign(8, 0.25);
    mu.density = rho;
    carnot::io::write_json(
        tmp.path / "cfg" / "m" / "measure.json",
        carnot::io::measure_to_json(g, mu, tmp.path / "cfg" / "m", "measure"));

    auto outcome = run_checked(
        base_config("potential-eval",
                    json{{"measure", {{"path", "m/measure.json"}}},
                         {"points", {{3.0, 0.0, 0.0}}}},
                    0),
        out, 0, {}, tmp.path / "cfg");
    CHECK(outcome.exit_code == 0);
    // 2.5 from the atom plus the 8-cell density of total mass 2.
    CHECK(outcome.summary.at("results").at("measure_mass").get<double>() ==
          doctest::Approx(4.5));
}

TEST_CASE("threshold requires its curve list") {
    TempDir tmp;
    auto outcome = run_checked(
        base_config("threshold",
                    json{{"maps", json::array()}, {"target_dim", 0.6}}),
        tmp.path);
    CHECK(outcome.exit_code == 2);
    const std::string msg = outcome.summary.at("errors")[0].get<std::string>();
    CHECK(msg.find("curves") != std::string::npos);
}
