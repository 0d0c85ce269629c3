#include "apilot/common/error.hpp"
#include "apilot/guardrail/guardrail.hpp"
#include "apilot/pyparse/parser.hpp"

#include <httplib.h>
#include <json.hpp>

#include <fmt/format.h>
#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

using namespace apilot;
using namespace apilot::guardrail;
using namespace apilot::catalog;

namespace {

OutdatedApiRecord patched(std::string_view path, std::string_view package, std::string_view id,
                          std::string_view fixed = "1.0.4") {
    PatchedInfo p;
    p.advisory_id = std::string(id);
    p.affected_ranges = {VersionRange{Version::parse("0"), Version::parse(fixed)}};
    p.bug_type = "Deserialization of Untrusted Data";
    p.cvss = 9.8;
    return {ApiPath::parse(path), PackageId::pypi(package), p};
}

OutdatedApiRecord deprecated(std::string_view path, std::string_view package, std::optional<std::string> removed) {
    DeprecatedInfo d;
    d.deprecated_date = Date::parse("2021-01-01");
    if (removed) d.removed_date = Date::parse(*removed);
    d.evidence_commit = "abc123";
    return {ApiPath::parse(path), PackageId::pypi(package), d};
}

ApiCatalog make_catalog() {
    return ApiCatalog({
        patched("pandas.read_pickle", "pandas", "CVE-2020-13901"),
        patched("yaml.load", "pyyaml", "CVE-2017-18342", "5.1"),
        deprecated("networkx.to_numpy_matrix", "networkx", std::string("2023-04-04")),
    });
}

std::string fenced(std::string_view code) {
    return fmt::format("Here you go:\n```python\n{}\n```\n", code);
}

const std::string kPickle = "import pandas as pd\ndata = pd.read_pickle('f.pkl')";
const std::string kYaml = "import yaml\ncfg = yaml.load(open('c.yml'))";
const std::string kClean = "import json\ncfg = json.load(open('c.json'))";

/// Answers with an outdated call until the prompt bans it, then switches.
class CompliantClient final : public LlmClient {
public:
    std::string send(std::string_view prompt, double) override {
        ++calls;
        if (prompt.find("pandas.read_pickle") == std::string_view::npos) return fenced(kPickle);
        if (prompt.find("yaml.load") == std::string_view::npos) return fenced(kYaml);
        return fenced(kClean);
    }
    int calls = 0;
};

}  // namespace

// ---------------------------------------------------------------- wrapping

TEST(Wrap, SectionsInOrder) {
    const auto w = wrap_prompt("Load a pickle file.", {ApiPath::parse("pandas.read_pickle"), ApiPath::parse("yaml.load")});
    const auto instr = w.find("exactly one code block");
    const auto task = w.find("Task:\nLoad a pickle file.");
    const auto bans = w.find("1. pandas.read_pickle\n2. yaml.load");
    ASSERT_NE(instr, std::string::npos);
    ASSERT_NE(task, std::string::npos);
    ASSERT_NE(bans, std::string::npos);
    EXPECT_LT(instr, task);
    EXPECT_LT(task, bans);
    EXPECT_EQ(w.find('#'), std::string::npos);
    EXPECT_EQ(w.find("@@"), std::string::npos);
}

TEST(Wrap, NoBanSectionWhenEmpty) {
    const auto w = wrap_prompt("p", {});
    EXPECT_EQ(w.find("outdated"), std::string::npos);
    EXPECT_EQ(w.find("previous reply"), std::string::npos);
    EXPECT_NE(wrap_prompt("p", {}, true).find("previous reply"), std::string::npos);
}

TEST(Wrap, PromptIsNotTemplated) {
    const auto w = wrap_prompt("use {items} and {prompt} literally", {});
    EXPECT_NE(w.find("use {items} and {prompt} literally"), std::string::npos);
    EXPECT_FALSE(prompt_template_version().empty());
}

// ---------------------------------------------------------------- loop

TEST(Loop, CleanOnSecondIteration) {
    TranscriptClient client({fenced(kPickle), fenced(kClean)});
    const auto s = generate_guarded("load data", client, make_catalog());
    EXPECT_EQ(s.status, SessionStatus::clean);
    ASSERT_EQ(s.iterations.size(), 2u);
    EXPECT_EQ(client.calls(), 2u);
    EXPECT_EQ(s.final_code, kClean);
    EXPECT_TRUE(s.warnings.empty());
    ASSERT_EQ(s.cumulative_ban_list.size(), 1u);
    EXPECT_EQ(s.cumulative_ban_list[0].dotted(), "pandas.read_pickle");
    EXPECT_EQ(client.prompts()[0].find("pandas.read_pickle"), std::string::npos);
    EXPECT_NE(client.prompts()[1].find("1. pandas.read_pickle"), std::string::npos);
}

TEST(Loop, ExhaustedAfterMaxIterations) {
    TranscriptClient client({fenced(kPickle), fenced(kYaml), fenced(kPickle), fenced(kClean)});
    const auto s = generate_guarded("load data", client, make_catalog());
    EXPECT_EQ(s.status, SessionStatus::exhausted);
    EXPECT_EQ(client.calls(), 3u);
    EXPECT_EQ(s.final_code, kPickle);
    ASSERT_EQ(s.warnings.size(), 1u);
    EXPECT_NE(s.warnings[0].find("CVE-2020-13901"), std::string::npos);
    EXPECT_NE(s.warnings[0].find("9.8"), std::string::npos);
    EXPECT_NE(s.warnings[0].find("[0, 1.0.4)"), std::string::npos);
    const std::vector<std::string> bans{"pandas.read_pickle", "yaml.load"};
    std::vector<std::string> got;
    for (const auto& p : s.cumulative_ban_list) got.push_back(p.dotted());
    EXPECT_EQ(got, bans);
}

TEST(Loop, CleanFirstTime) {
    TranscriptClient client({fenced(kClean)});
    const auto s = generate_guarded("p", client, make_catalog());
    EXPECT_EQ(s.status, SessionStatus::clean);
    EXPECT_EQ(s.iterations.size(), 1u);
    EXPECT_TRUE(s.cumulative_ban_list.empty());
}

TEST(Loop, BanListGrowsMonotonically) {
    CompliantClient client;
    const auto s = generate_guarded("p", client, make_catalog());
    EXPECT_EQ(s.status, SessionStatus::clean);
    EXPECT_EQ(client.calls, 3);
    std::size_t prev = 0;
    for (const auto& it : s.iterations) {
        std::size_t n = 0;
        while (it.wrapped_prompt.find(fmt::format("{}. ", n + 1)) != std::string::npos) ++n;
        EXPECT_GE(n, prev);
        prev = n;
    }
    EXPECT_EQ(prev, 2u);
}

TEST(Loop, FailuresConsumeIterationsAndRemind) {
    TranscriptClient client({"no code here", fenced("def broken(:\n  pass"), fenced(kClean)});
    const auto s = generate_guarded("p", client, make_catalog());
    EXPECT_EQ(s.status, SessionStatus::clean);
    ASSERT_EQ(s.iterations.size(), 3u);
    EXPECT_EQ(s.iterations[0].report.extraction, sanitizer::StageStatus::failed);
    EXPECT_EQ(s.iterations[1].report.parse, sanitizer::StageStatus::failed);
    EXPECT_EQ(client.prompts()[0].find("previous reply"), std::string::npos);
    EXPECT_NE(client.prompts()[1].find("previous reply"), std::string::npos);
    EXPECT_NE(client.prompts()[2].find("previous reply"), std::string::npos);
}

TEST(Loop, AllFailuresLeaveNoCode) {
    TranscriptClient client({"a", "b"});
    GenerationConfig cfg;
    cfg.max_iterations = 2;
    const auto s = generate_guarded("p", client, make_catalog(), cfg);
    EXPECT_EQ(s.status, SessionStatus::exhausted);
    EXPECT_TRUE(s.final_code.empty());
    EXPECT_TRUE(s.warnings.empty());
}

TEST(Loop, UserVersionOutsideRangeIsClean) {
    TranscriptClient client({fenced(kPickle)});
    GenerationConfig cfg;
    cfg.user_versions[PackageId::pypi("pandas")] = Version::parse("1.0.4");
    const auto s = generate_guarded("p", client, make_catalog(), cfg);
    EXPECT_EQ(s.status, SessionStatus::clean);
}

TEST(Loop, ClientFailureCarriesPartialSession) {
    TranscriptClient client({fenced(kPickle)});
    try {
        (void)generate_guarded("p", client, make_catalog());
        FAIL() << "expected GenerationInterrupted";
    } catch (const GenerationInterrupted& e) {
        EXPECT_EQ(e.session.iterations.size(), 1u);
        EXPECT_EQ(e.session.cumulative_ban_list.size(), 1u);
    }
}

TEST(Loop, ConfigValidation) {
    TranscriptClient client({});
    GenerationConfig cfg;
    cfg.max_iterations = 0;
    EXPECT_THROW((void)generate_guarded("p", client, make_catalog(), cfg), ConfigError);
    cfg.max_iterations = 1;
    cfg.temperature = -0.5;
    EXPECT_THROW((void)generate_guarded("p", client, make_catalog(), cfg), ConfigError);
    EXPECT_EQ(client.calls(), 0u);
}

TEST(Loop, SessionReplayReproduces) {
    TranscriptClient client({fenced(kPickle), fenced(kYaml), fenced(kClean)});
    const auto s = generate_guarded("p", client, make_catalog());
    const auto log = session_to_json(s);
    const auto doc = nlohmann::json::parse(log);
    EXPECT_EQ(doc["status"], "clean");
    EXPECT_EQ(doc["iterations"].size(), 3u);
    TranscriptClient replay(session_responses(log));
    const auto again = generate_guarded("p", replay, make_catalog());
    EXPECT_EQ(again.status, s.status);
    EXPECT_EQ(again.final_code, s.final_code);
    EXPECT_EQ(replay.prompts(), client.prompts());
    EXPECT_THROW((void)session_responses("{}"), ConfigError);
}

// ---------------------------------------------------------------- warnings

TEST(Warning, DeprecatedGrace) {
    const auto cat = make_catalog();
    sanitizer::Finding f;
    f.api_path = ApiPath::parse("networkx.to_numpy_matrix");
    const auto idx = cat.find_by_path("networkx.to_numpy_matrix");
    ASSERT_EQ(idx.size(), 1u);
    f.record = cat.at(idx[0]);
    const auto w = render_warning(f);
    EXPECT_NE(w.find("2021-01-01"), std::string::npos);
    EXPECT_NE(w.find("2023-04-04"), std::string::npos);
    EXPECT_NE(w.find("823 days"), std::string::npos);
    f.record = deprecated("networkx.to_numpy_matrix", "networkx", std::nullopt);
    EXPECT_NE(render_warning(f).find("not yet removed"), std::string::npos);
}

TEST(Warning, UsageModified) {
    UsageModifiedInfo u;
    u.change = UsageChange::params_changed;
    u.old_signature = "f(a, b)";
    u.new_signature = "f(a, *, b)";
    u.evidence_commit = "c";
    u.evidence_date = Date::parse("2022-02-02");
    sanitizer::Finding f;
    f.api_path = ApiPath::parse("m.f");
    f.record = {f.api_path, PackageId::pypi("m"), u};
    const auto w = render_warning(f);
    EXPECT_NE(w.find("`f(a, b)` became `f(a, *, b)`"), std::string::npos);
}

// ---------------------------------------------------------------- version gate

namespace {

VersionGate pickle_gate() {
    return VersionGate{PackageId::pypi("pandas"),
                       ApiPath::parse("pandas.read_pickle"),
                       {VersionRange{Version::parse("0"), Version::parse("1.0.4")}},
                       "import pandas as pd\ndf = pd.read_pickle('x.pkl')\nprint('vulnerable-path')",
                       std::nullopt};
}

std::string run_python(const std::string& gate, const std::string& fake_version) {
    const auto dir = std::filesystem::temp_directory_path() / fmt::format("apilot_gate_{}", ::getpid());
    std::filesystem::create_directories(dir / "pandas");
    std::ofstream(dir / "pandas" / "__init__.py") << "def read_pickle(p):\n    return p\n";
    std::ofstream(dir / "harness.py") << "import importlib.metadata as m\n"
                                         "m.version = lambda name: "
                                      << nlohmann::json(fake_version).dump()
                                      << "\n"
                                         "import sys\n"
                                         "exec(compile(open(sys.argv[1]).read(), 'gate', 'exec'), {'__name__': '__main__'})\n";
    std::ofstream(dir / "gate.py") << gate;
    const auto cmd = fmt::format("cd '{}' && python3 harness.py gate.py 2>&1", dir.string());
    std::string out;
    if (FILE* p = ::popen(cmd.c_str(), "r")) {
        char buf[512];
        while (std::fgets(buf, sizeof buf, p)) out += buf;
        ::pclose(p);
    }
    std::filesystem::remove_all(dir);
    return out;
}

bool have_python() {
    return std::system("python3 -c 'import importlib.metadata' >/dev/null 2>&1") == 0;
}

}  // namespace

TEST(Gate, ParsesAndNamesApi) {
    const auto src = emit_version_gate(pickle_gate());
    EXPECT_NO_THROW((void)pyparse::parse_module(src));
    EXPECT_NE(src.find("\"pandas.read_pickle\""), std::string::npos);
    EXPECT_NE(src.find("AFFECTED = [(\"0\", \"1.0.4\")]"), std::string::npos);
}

TEST(Gate, OpenRangeAndCleanSnippet) {
    auto g = pickle_gate();
    g.affected_ranges.push_back(VersionRange{Version::parse("2.0"), std::nullopt});
    g.clean_snippet = "import pickle\ns = '''multi\nline'''\nprint(s)";
    const auto src = emit_version_gate(g);
    EXPECT_NO_THROW((void)pyparse::parse_module(src));
    EXPECT_NE(src.find("(\"2.0\", None)"), std::string::npos);
    EXPECT_NE(src.find("    s = '''multi\nline'''"), std::string::npos);
}

TEST(Gate, EmptyRangesRejected) {
    auto g = pickle_gate();
    g.affected_ranges.clear();
    EXPECT_THROW((void)emit_version_gate(g), InvariantViolation);
}

TEST(Gate, RunsUnderPython) {
    if (!have_python()) GTEST_SKIP() << "python3 not available";
    const auto src = emit_version_gate(pickle_gate());
    const auto affected = run_python(src, "1.0.3");
    EXPECT_NE(affected.find("warning: pandas.read_pickle"), std::string::npos) << affected;
    EXPECT_EQ(affected.find("vulnerable-path"), std::string::npos) << affected;
    const auto fixed = run_python(src, "1.0.4");
    EXPECT_NE(fixed.find("vulnerable-path"), std::string::npos) << fixed;
    EXPECT_EQ(fixed.find("warning"), std::string::npos) << fixed;
    EXPECT_NE(run_python(src, "1.0.4.0").find("vulnerable-path"), std::string::npos);
    EXPECT_NE(run_python(src, "1.0.3rc1").find("warning"), std::string::npos);
    EXPECT_NE(run_python(src, "0.25.3").find("warning"), std::string::npos);
    EXPECT_NE(run_python(src, "1.1").find("vulnerable-path"), std::string::npos);

    auto g = pickle_gate();
    g.clean_snippet = "s = '''a\nb'''\nprint('clean-path', s.count('\\n'))";
    const auto clean = run_python(emit_version_gate(g), "1.0.0");
    EXPECT_NE(clean.find("clean-path 1"), std::string::npos) << clean;
}

// ---------------------------------------------------------------- clients

TEST(Client, TranscriptFormats) {
    EXPECT_EQ(parse_transcript(R"(["a","b"])"), (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(parse_transcript(R"({"responses":["c"]})"), (std::vector<std::string>{"c"}));
    EXPECT_THROW((void)parse_transcript("{}"), ConfigError);
    EXPECT_THROW((void)parse_transcript("[1]"), ConfigError);
    TranscriptClient c({"x"});
    EXPECT_EQ(c.send("p", 0), "x");
    EXPECT_THROW((void)c.send("p", 0), ClientFailure);
}

TEST(Client, ConfigParsing) {
    const auto http = parse_client_config(R"({"kind":"http","endpoint":"http://h:1/v1/chat","model":"m"})");
    EXPECT_EQ(http.kind, "http");
    EXPECT_EQ(http.http.endpoint, "http://h:1/v1/chat");
    const auto mock = parse_client_config(R"({"kind":"mock","transcript_path":"t.json"})", "/cfg");
    EXPECT_EQ(mock.transcript_path, std::filesystem::path("/cfg/t.json"));
    EXPECT_THROW((void)parse_client_config(R"({"kind":"http","endpoint":"x","token":"secret"})"), ConfigError);
    EXPECT_THROW((void)parse_client_config(R"({"kind":"grpc"})"), ConfigError);
    EXPECT_THROW((void)parse_client_config("nope"), ConfigError);
    EXPECT_THROW(HttpClient({"ftp://h/x", "m", "", std::chrono::seconds(1)}), ConfigError);
    EXPECT_THROW(HttpClient({"http://h/x", "m", "APILOT_TEST_SURELY_UNSET_VAR", std::chrono::seconds(1)}),
                 ConfigError);
}

TEST(Client, HttpRoundTrip) {
    httplib::Server server;
    nlohmann::json seen;
    std::string auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen = nlohmann::json::parse(req.body);
        auth = req.get_header_value("Authorization");
        const nlohmann::json reply = {
            {"choices", {{{"message", {{"role", "assistant"}, {"content", fenced(kClean)}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    server.Post("/broken", [](const httplib::Request&, httplib::Response& res) {
        res.status = 500;
        res.set_content("boom", "text/plain");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("APILOT_TEST_TOKEN", "t0k", 1);
    HttpClient client({fmt::format("http://127.0.0.1:{}/v1/chat/completions", port), "test-model",
                       "APILOT_TEST_TOKEN", std::chrono::seconds(5)});
    const auto s = generate_guarded("write json loader", client, make_catalog());
    EXPECT_EQ(s.status, SessionStatus::clean);
    EXPECT_EQ(seen["model"], "test-model");
    EXPECT_DOUBLE_EQ(seen["temperature"].get<double>(), 0.7);
    EXPECT_NE(seen["messages"][0]["content"].get<std::string>().find("write json loader"), std::string::npos);
    EXPECT_EQ(auth, "Bearer t0k");

    HttpClient broken({fmt::format("http://127.0.0.1:{}/broken", port), "m", "", std::chrono::seconds(5)});
    EXPECT_THROW((void)broken.send("p", 0), ClientFailure);
    server.stop();
    t.join();
    HttpClient down({fmt::format("http://127.0.0.1:{}/v1/chat/completions", port), "m", "", std::chrono::seconds(1)});
    EXPECT_THROW((void)down.send("p", 0), ClientFailure);
}
