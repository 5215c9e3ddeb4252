// End-to-end checks of the command-line tool: spawn the real binary, inspect
// exit codes, console output, and the files it writes.

#include <catch2/catch_amalgamated.hpp>

#include "iobs/config.hpp"
#include "iobs/model.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using iobs::Json;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("iobs-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

RunResult run_cli(const TempDir& dir, const std::string& args) {
    const fs::path out_file = dir.path / "stdout.txt";
    const fs::path err_file = dir.path / "stderr.txt";
    const std::string cmd = std::string("\"") + IOBS_CLI_PATH + "\" " + args + " > \"" +
                            out_file.string() + "\" 2> \"" + err_file.string() + "\"";
    const int status = std::system(cmd.c_str());
    RunResult res;
    res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    res.out = slurp(out_file);
    res.err = slurp(err_file);
    return res;
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

// Writes the discrete benchmark config into the directory and returns its path.
fs::path write_benchmark(const TempDir& dir) {
    const fs::path cfg = dir.path / "bench.json";
    const RunResult r = run_cli(dir, "example paper-dt --out " + quoted(cfg));
    REQUIRE(r.code == 0);
    return cfg;
}

std::vector<std::vector<double>> read_csv(const fs::path& p, std::string& header) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::getline(in, header);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) row.push_back(std::strtod(field.c_str(), nullptr));
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

TEST_CASE("example emits a loadable benchmark config") {
    TempDir dir;
    const fs::path cfg_path = dir.path / "bench.json";
    const RunResult r = run_cli(dir, "example paper-dt --out " + quoted(cfg_path));
    REQUIRE(r.code == 0);
    REQUIRE(r.out.find("config written to") != std::string::npos);

    const iobs::ScenarioConfig cfg = iobs::load_config(cfg_path.string());
    REQUIRE(cfg.scenario.system.n_x() == 4);
    REQUIRE(iobs::validate_scenario(cfg.scenario).ok());

    const RunResult bad = run_cli(dir, "example no-such-preset --out " +
                                           quoted(dir.path / "x.json"));
    REQUIRE(bad.code == 2);
    REQUIRE(bad.err.find("unknown preset") != std::string::npos);
}

TEST_CASE("design writes a document with transform and certificates") {
    TempDir dir;
    const fs::path cfg = write_benchmark(dir);
    const fs::path doc_path = dir.path / "design.json";
    const RunResult r = run_cli(dir, "design " + quoted(cfg) + " --out " + quoted(doc_path));
    REQUIRE(r.code == 0);
    REQUIRE(r.out.find("design written to") != std::string::npos);
    REQUIRE(r.out.find("certificates pass") != std::string::npos);

    Json doc;
    std::ifstream(doc_path) >> doc;
    REQUIRE(doc.at("n_o").get<int>() == 3);
    REQUIRE(doc.at("n_no").get<int>() == 1);
    REQUIRE(doc.at("certificates").at("pass").get<bool>());
    REQUIRE(std::abs(doc.at("T")[0][0].get<double>() + 10.0 / 11.0) <= 1e-12);
    REQUIRE(std::abs(doc.at("Lambda")[0][0].get<double>() - 0.5) <= 1e-12);
    REQUIRE(doc.at("rng").at("algorithm").get<std::string>() == "mt19937_64");
}

TEST_CASE("simulate writes the requested horizon to CSV") {
    TempDir dir;
    const fs::path cfg = write_benchmark(dir);
    const fs::path csv = dir.path / "traj.csv";
    const RunResult r =
        run_cli(dir, "simulate " + quoted(cfg) + " --steps 50 --out " + quoted(csv));
    REQUIRE(r.code == 0);
    REQUIRE(r.out.find("violations:        0") != std::string::npos);
    REQUIRE(r.out.find("trajectory written to") != std::string::npos);

    std::string header;
    const auto rows = read_csv(csv, header);
    REQUIRE(header.rfind("t,", 0) == 0);
    REQUIRE(header.find("xupper_1") != std::string::npos);
    REQUIRE(header.find("width_4") != std::string::npos);
    REQUIRE(rows.size() == 51);
    REQUIRE(rows.front().at(0) == 0.0);
    REQUIRE(rows.back().at(0) == 50.0);
    for (const auto& row : rows) {
        REQUIRE(row.size() == 17); // t + 4*(x, upper, lower) + 4 widths
        for (int i = 0; i < 4; ++i) {
            const double x = row[1 + 3 * i], up = row[2 + 3 * i], lo = row[3 + 3 * i];
            const double width = row[13 + i];
            REQUIRE(up + 1e-9 >= x);
            REQUIRE(lo - 1e-9 <= x);
            REQUIRE(std::abs((up - lo) - width) <= 1e-9 * (1.0 + std::abs(width)));
        }
    }
}

TEST_CASE("cascade and direct forms write matching enclosures") {
    TempDir dir;
    const fs::path cfg = write_benchmark(dir);
    const fs::path csv_c = dir.path / "cascade.csv";
    const fs::path csv_d = dir.path / "direct.csv";
    REQUIRE(run_cli(dir, "simulate " + quoted(cfg) + " --steps 40 --form cascade --out " +
                             quoted(csv_c))
                .code == 0);
    REQUIRE(run_cli(dir, "simulate " + quoted(cfg) + " --steps 40 --form direct --out " +
                             quoted(csv_d))
                .code == 0);

    std::string header_c, header_d;
    const auto rows_c = read_csv(csv_c, header_c);
    const auto rows_d = read_csv(csv_d, header_d);
    REQUIRE(header_c == header_d);
    REQUIRE(rows_c.size() == rows_d.size());
    for (std::size_t k = 0; k < rows_c.size(); ++k) {
        REQUIRE(rows_c[k].size() == rows_d[k].size());
        for (std::size_t j = 0; j < rows_c[k].size(); ++j) {
            const double a = rows_c[k][j], b = rows_d[k][j];
            REQUIRE(std::abs(a - b) <= 1e-9 * (1.0 + std::abs(a)));
        }
    }
}

TEST_CASE("verify passes on the benchmark and reports the run") {
    TempDir dir;
    const fs::path cfg = write_benchmark(dir);
    const RunResult r = run_cli(dir, "verify " + quoted(cfg) + " --trials 3 --steps 60");
    REQUIRE(r.code == 0);
    REQUIRE(r.out.find("decomposition certificates: pass") != std::string::npos);
    REQUIRE(r.out.find("violations:        0") != std::string::npos);
    REQUIRE(r.out.find("verification passed") != std::string::npos);
}

TEST_CASE("verify detects a damaged transform") {
    TempDir dir;
    const fs::path cfg = write_benchmark(dir);
    const RunResult r =
        run_cli(dir, "verify " + quoted(cfg) + " --trials 2 --steps 40 --corrupt-t");
    REQUIRE(r.code == 4);
    REQUIRE(r.out.find("deliberately corrupted T") != std::string::npos);
    REQUIRE(r.err.find("verification failed") != std::string::npos);
}

TEST_CASE("broken configs exit with the validation code") {
    TempDir dir;

    const fs::path missing_field = dir.path / "missing.json";
    std::ofstream(missing_field) << R"({"domain": "dt", "F": [[1.0]]})";
    RunResult r = run_cli(dir, "design " + quoted(missing_field));
    REQUIRE(r.code == 2);
    REQUIRE(r.err.find("missing required field") != std::string::npos);

    const fs::path mangled = dir.path / "mangled.json";
    std::ofstream(mangled) << "this is { not json";
    r = run_cli(dir, "design " + quoted(mangled));
    REQUIRE(r.code == 2);
    REQUIRE(r.err.find("cannot parse") != std::string::npos);

    r = run_cli(dir, "design " + quoted(dir.path / "no-such-file.json"));
    REQUIRE(r.code == 2);
    REQUIRE(r.err.find("cannot open") != std::string::npos);
}

TEST_CASE("undetectable plants exit with the design code") {
    TempDir dir;
    Json j;
    j["domain"] = "dt";
    j["F"] = {{1.1, 0.0}, {0.0, 0.5}};
    j["D"] = {{1.0}, {0.0}};
    j["H"] = {{0.0, 1.0}};
    j["W"] = {{1.0}};
    j["x0"] = {0.0, 0.0};
    j["bounds"] = {{"x0_upper", {1.0, 1.0}},
                   {"x0_lower", {-1.0, -1.0}},
                   {"d_upper", {"0.1"}},
                   {"d_lower", {"-0.1"}},
                   {"w_upper", {"0.1"}},
                   {"w_lower", {"-0.1"}}};
    j["signals"] = {{"u", {"0", "0"}}, {"d", {"0"}}, {"w", {"0"}}};
    const fs::path cfg = dir.path / "undetectable.json";
    std::ofstream(cfg) << j.dump(2);

    const RunResult r = run_cli(dir, "design " + quoted(cfg));
    REQUIRE(r.code == 3);
    REQUIRE(r.err.find("unobservable block") != std::string::npos);
}
