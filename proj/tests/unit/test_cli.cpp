#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "treedtn/cli.hpp"

using namespace treedtn;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> v;
    std::istringstream in(s);
    for (std::string line; std::getline(in, line);) v.push_back(line);
    return v;
}

}  // namespace

TEST_CASE("counterexample") {
    const Result r = run({"counterexample"});
    CHECK(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["result"]["u(0)"] == "0/1");
    CHECK(j["result"]["u(2)"] == "1/1");
}

TEST_CASE("lambda sweep with the linear datum") {
    const Result r = run({"lambda", "--m", "2", "--beta", "0", "--eta=-1,1", "--datum", "linear", "--depths", "2..14",
                          "--format", "json"});
    CHECK(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    REQUIRE(j["rows"].size() == 13);
    CHECK(j["rows"].back()["gap"].get<double>() < 1e-3);
    // g = t is reproduced exactly at every depth, so there is no rate to fit
    CHECK(j["summary"]["slope"].is_null());
}

TEST_CASE("lambda sweep fits the rate for t^2") {
    const Result r = run({"lambda", "--m", "2", "--beta", "0", "--eta=-1,1", "--datum", "square", "--branch", "t:1/3",
                          "--depths", "2..14", "--format", "json"});
    CHECK(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["rows"].back()["gap"].get<double>() < 1e-3);
    CHECK(std::abs(j["summary"]["slope"].get<double>() + std::log(2.0)) < 0.1 * std::log(2.0));
}

TEST_CASE("csv output carries the config and a header") {
    const Result r = run({"solve", "--m", "3", "--beta", "1/4", "--datum", "square", "--depth", "2"});
    CHECK(r.code == 0);
    const auto v = lines(r.out);
    REQUIRE(v.size() >= 3);
    CHECK(v[0] == "# config: command=solve m=3 beta=1/4 datum=square depth=2 tol=1e-12");
    CHECK(v[1] == "vertex,level,value,residual");
    CHECK(v.size() == 2 + 13 + 1);  // 13 vertices and one summary line
    for (std::size_t i = 2; i < 15; ++i) CHECK(v[i].substr(v[i].rfind(',') + 1) == "0/1");
}

TEST_CASE("output is deterministic") {
    const std::vector<std::string> args = {"walk", "--m", "3", "--beta", "1/10", "--samples", "5000", "--walk-depth",
                                           "12", "--seed", "9", "--vertex", "2"};
    CHECK(run(args).out == run(args).out);
    const std::vector<std::string> g = {"gamma", "--beta", "2/5", "--depths", "1..8"};
    CHECK(run(g).out == run(g).out);
}

TEST_CASE("exit codes") {
    CHECK(run({"solve", "--beta", "2/3"}).code == 1);              // no bounded solution
    CHECK(run({"solve", "--m", "1"}).code == 1);                   // bad tree
    CHECK(run({"kernel", "--beta", "1/4"}).code == 1);            // beta below 1/(m+1)
    CHECK(run({"nonsense"}).code == 1);
    CHECK(run({"solve", "--format", "xml"}).code == 1);
    CHECK(run({"compare", "--datum", "square", "--datum2", "linear"}).code == 1);  // f <= g fails
    CHECK(run({"compare", "--datum", "linear", "--datum2", "square", "--depth", "5"}).code == 0);
}

TEST_CASE("hypothesis violations are reported per row") {
    const Result r = run({"lambda", "--beta", "1/4", "--eta", "1,0", "--depths", "2,3"});
    CHECK(r.code == 0);
    CHECK(r.out.find("sum(eta) = 0") != std::string::npos);
}

TEST_CASE("decimal beta is noted") {
    const Result r = run({"trace", "--beta", "0.35", "--depths", "1..3"});
    CHECK(r.code == 0);
    CHECK(r.err.find("7/20") != std::string::npos);
}

TEST_CASE("config file with flag override") {
    const std::string path = "cli_test_config.json";
    {
        std::ofstream f(path);
        f << R"({"m": 3, "beta": "1/4", "datum": "square", "depth": 1, "format": "json"})";
    }
    const Result a = run({"solve", "--config", path});
    const Result b = run({"solve", "--config", path, "--m", "2"});
    std::remove(path.c_str());
    CHECK(a.code == 0);
    CHECK(b.code == 0);
    const auto ja = nlohmann::json::parse(a.out), jb = nlohmann::json::parse(b.out);
    CHECK(ja["config"]["m"] == "3");
    CHECK(ja["rows"].size() == 4);
    CHECK(jb["config"]["m"] == "2");
    CHECK(jb["rows"].size() == 3);
}

TEST_CASE("growth and walk") {
    const Result g = run({"growth", "--beta", "3/5", "--steps", "10"});
    CHECK(g.code == 0);
    const Result t = run({"growth", "--beta", "1/2", "--threshold", "1000", "--format", "json"});
    CHECK(t.code == 0);
    CHECK(nlohmann::json::parse(t.out)["result"]["first_exceeding"] == 1000);
    const Result w = run({"walk", "--beta", "1/3", "--vertex", "1", "--samples", "20000"});
    CHECK(w.code == 0);
    CHECK(nlohmann::json::parse(w.out)["result"]["consistent"] == true);
}

TEST_CASE("kernel and compare tables") {
    const Result k = run({"kernel", "--beta", "2/5", "--branch", "t:0", "--grid", "8"});
    CHECK(k.code == 0);
    CHECK(lines(k.out).size() == 2 + 8 + 1);  // t = 0 is the singular point
    const Result kj = run({"kernel", "--beta", "2/5", "--vertex", "0.1", "--j", "1", "--grid", "4"});
    CHECK(kj.code == 0);
    const Result c = run({"compare", "--pairs", "5", "--beta", "1/3", "--depth", "5"});
    CHECK(c.code == 0);
}

TEST_CASE("check suite passes") {
    const Result r = run({"check", "--depth", "5"});
    CHECK(r.code == 0);
    CHECK(r.out.find(",fail,") == std::string::npos);
}
