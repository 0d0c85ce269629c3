// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include "apilot/advisories/advisory.hpp"
#include "apilot/catalog/catalog.hpp"
#include "apilot/common/error.hpp"
#include "apilot/evalharness/harness.hpp"
#include "apilot/guardrail/client.hpp"
#include "apilot/guardrail/guardrail.hpp"
#include "apilot/miner/history.hpp"
#include "apilot/miner/mine.hpp"
#include "apilot/pyparse/literal.hpp"
#include "apilot/pyparse/parser.hpp"
#include "apilot/pyparse/unparse.hpp"
#include "apilot/pyparse/walk.hpp"
#include "apilot/sanitizer/extract.hpp"
#include "apilot/sanitizer/sanitize.hpp"

#include "synthetic_catalog.hpp"
#include "synthetic_repo.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include <unistd.h>

#ifndef APILOT_SOURCE_DIR
#error "APILOT_SOURCE_DIR must be defined"
#endif

namespace fs = std::filesystem;
using namespace apilot;
using catalog::ApiCatalog;
using catalog::ApiPath;

namespace {

const fs::path kData = fs::path(APILOT_SOURCE_DIR) / "tests" / "data";

struct Outcome {
    std::vector<std::string> problems;
    std::string summary;

    void require(bool ok, std::string what) {
        if (!ok) problems.push_back(std::move(what));
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fenced(std::string_view code) {
    return fmt::format("```python\n{}\n```", code);
}

const ApiCatalog& fixture_catalog() {
    static const ApiCatalog cat = [] {
        const auto supplement = advisories::load_symbol_supplement(kData / "advisories" / "symbols.json");
        const auto ingested = advisories::ingest_directory(kData / "advisories" / "osv", &supplement);
        if (!ingested.errors.empty()) throw Error("fixture advisories rejected: " + ingested.errors.front());
        std::vector<catalog::OutdatedApiRecord> records;
        for (const auto& a : ingested.advisories) {
            for (auto& r : advisories::to_catalog_records(a, null_sink())) records.push_back(std::move(r));
        }
        return ApiCatalog(std::move(records));
    }();
    return cat;
}

// ------------------------------------------------------------------ AC1

struct DetectionCase {
    const char* advisory;
    const char* api;
    const char* snippet;
};

const DetectionCase kDetection[] = {
    {"CVE-2012-2374", "tornado.web.RequestHandler.set_header",
     "import tornado.web\n"
     "\n"
     "class TraceHandler(tornado.web.RequestHandler):\n"
     "    def get(self):\n"
     "        self.set_header(\"X-Trace\", self.get_argument(\"trace\"))\n"},
    {"CVE-2013-0294", "pyrad.packet.Packet.CreateAuthenticator",
     "from pyrad.packet import Packet\n"
     "pkt = Packet()\n"
     "auth = pkt.CreateAuthenticator()\n"},
    {"CVE-2013-0342", "pyrad.packet.Packet.CreateID",
     "import pyrad.packet\n"
     "packet = pyrad.packet.Packet(secret=b\"s3cret\")\n"
     "ident = packet.CreateID()\n"},
    {"CVE-2013-4251", "scipy.weave.inline",
     "from scipy import weave\n"
     "result = weave.inline(\"return_val = a + 1;\", [\"a\"])\n"},
    {"CVE-2014-0012", "jinja2.bccache.FileSystemBytecodeCache",
     "from jinja2 import Environment\n"
     "from jinja2.bccache import FileSystemBytecodeCache\n"
     "env = Environment(bytecode_cache=FileSystemBytecodeCache(\"/tmp/jinja\"))\n"},
    {"CVE-2015-0260", "rhodecode.controllers.api.api.ApiController.get_repo",
     "from rhodecode.controllers.api.api import ApiController\n"
     "api = ApiController()\n"
     "repo = api.get_repo(apiuser, repoid=\"42\")\n"},
    {"CVE-2015-1613", "rhodecode.controllers.api.api.ApiController.update_repo",
     "import rhodecode.controllers.api.api as rapi\n"
     "controller = rapi.ApiController()\n"
     "controller.update_repo(apiuser, repoid=\"42\", description=\"new\")\n"},
    {"CVE-2015-7316", "Products.CMFPlone.URLTool.URLTool.isURLInPortal",
     "from Products.CMFPlone.URLTool import URLTool\n"
     "tool = URLTool()\n"
     "if tool.isURLInPortal(came_from):\n"
     "    redirect(came_from)\n"},
    {"CVE-2016-10149", "saml2.soap.parse_soap_enveloped_saml",
     "from saml2 import soap\n"
     "envelope = soap.parse_soap_enveloped_saml(xml_text, body_class=None)\n"},
    {"CVE-2017-12852", "numpy.pad",
     "import numpy as np\n"
     "padded = np.pad(grid, 2, mode=\"constant\")\n"},
    {"CVE-2017-18342", "yaml.load",
     "import yaml\n"
     "with open(\"config.yml\") as fh:\n"
     "    config = yaml.load(fh)\n"},
    {"CVE-2018-25091", "urllib3.PoolManager",
     "import urllib3\n"
     "http = urllib3.PoolManager()\n"
     "resp = http.request(\"GET\", \"https://example.org\")\n"},
    {"CVE-2019-20477", "yaml.load_all",
     "from yaml import load_all\n"
     "for doc in load_all(stream):\n"
     "    print(doc)\n"},
    {"CVE-2020-13092", "joblib.load",
     "import joblib\n"
     "model = joblib.load(\"model.pkl\")\n"},
    {"CVE-2020-13901", "pandas.read_pickle",
     "import pandas as pd\n"
     "df = pd.read_pickle(\"data.pkl\")\n"
     "print(df.head())\n"},
    {"CVE-2021-37677", "tensorflow.raw_ops.Dequantize",
     "import tensorflow as tf\n"
     "out = tf.raw_ops.Dequantize(input=q, min_range=0.0, max_range=1.0)\n"},
    {"CVE-2021-37679", "tensorflow.map_fn",
     "import tensorflow as tf\n"
     "doubled = tf.map_fn(lambda t: t * 2, xs)\n"},
    {"CVE-2021-3842", "nltk.tag.brill_trainer.BrillTaggerTrainer.train",
     "from nltk.tag.brill_trainer import BrillTaggerTrainer\n"
     "trainer = BrillTaggerTrainer(baseline, templates)\n"
     "tagger = trainer.train(train_sents, max_rules=10)\n"},
    {"CVE-2021-40324", "cobbler.tftpgen.TFTPGen.generate_script",
     "from cobbler.tftpgen import TFTPGen\n"
     "gen = TFTPGen(collection_mgr)\n"
     "script = gen.generate_script(\"profile\", name)\n"},
    {"CVE-2021-41195", "tensorflow.math.segment_sum",
     "import tensorflow as tf\n"
     "sums = tf.math.segment_sum(data, segment_ids)\n"},
    {"CVE-2021-41198", "tensorflow.tile",
     "from tensorflow import tile\n"
     "tiled = tile(x, [2, 1])\n"},
    {"CVE-2021-41199", "tensorflow.image.resize",
     "import tensorflow as tf\n"
     "image = tf.image.resize(image, [224, 224])\n"},
    {"CVE-2021-41200", "tensorflow.summary.create_file_writer",
     "import tensorflow as tf\n"
     "writer = tf.summary.create_file_writer(\"logs\")\n"},
    {"CVE-2021-41202", "tensorflow.range",
     "import tensorflow as tf\n"
     "steps = tf.range(10)\n"},
    {"CVE-2021-41495", "numpy.sort",
     "from numpy import sort\n"
     "ordered = sort(values)\n"},
    {"CVE-2021-43854", "nltk.tokenize.punkt.PunktSentenceTokenizer",
     "from nltk.tokenize.punkt import PunktSentenceTokenizer\n"
     "tokenizer = PunktSentenceTokenizer()\n"
     "sentences = tokenizer.tokenize(text)\n"},
    {"CVE-2022-22815", "PIL.ImagePath.Path",
     "from PIL import ImagePath\n"
     "outline = ImagePath.Path([(0, 0), (1, 1)])\n"},
    {"CVE-2022-22816", "PIL.ImagePath.Path",
     "from PIL.ImagePath import Path\n"
     "path = Path(coords)\n"
     "path.compact()\n"},
    {"CVE-2022-22817", "PIL.ImageMath.eval",
     "from PIL import Image, ImageMath\n"
     "blend = ImageMath.eval(\"a + b\", a=im1, b=im2)\n"},
    {"CVE-2022-24766", "mitmproxy.net.http.validate.validate_headers",
     "from mitmproxy.net.http import validate\n"
     "validate.validate_headers(headers)\n"},
};

// Same imports; every other line survives only as a comment and inside a
// string literal.
std::string mention_only(std::string_view snippet) {
    std::vector<std::string> imports, rest;
    std::istringstream in{std::string(snippet)};
    for (std::string line; std::getline(in, line);) {
        if (line.rfind("import ", 0) == 0 || line.rfind("from ", 0) == 0) {
            imports.push_back(line);
        } else if (!line.empty()) {
            rest.push_back(line);
        }
    }
    std::string out;
    for (const auto& l : imports) out += l + "\n";
    out += "\n";
    for (const auto& l : rest) out += "# " + l + "\n";
    out += "EXAMPLE = '''\n";
    for (const auto& l : rest) out += l + "\n";
    out += "'''\n";
    out += "print(EXAMPLE)\n";
    return out;
}

bool names_advisory(const sanitizer::Finding& f, std::string_view id) {
    if (f.record.advisory_id() == id) return true;
    return std::any_of(f.also.begin(), f.also.end(), [&](const auto& r) { return r.advisory_id() == id; });
}

Outcome ac1_detection() {
    Outcome o;
    const auto start = Clock::now();
    const auto& cat = fixture_catalog();
    int hits = 0, false_positives = 0, rows = 0;
    std::set<std::string> advisories_seen;
    for (const auto& c : kDetection) {
        ++rows;
        advisories_seen.insert(c.advisory);
        const auto report = sanitizer::sanitize(fenced(c.snippet), cat);
        if (report.failed()) {
            o.require(false, fmt::format("{}: snippet did not parse", c.advisory));
            continue;
        }
        if (report.findings.size() == 1 && report.findings[0].api_path == ApiPath::parse(c.api) &&
            names_advisory(report.findings[0], c.advisory)) {
            ++hits;
        } else {
            o.require(false, fmt::format("{}: {} finding(s){}", c.advisory, report.findings.size(),
                                         report.findings.empty() ? "" : " first " + report.findings[0].api_path.dotted()));
        }
        if (std::string_view(c.api) == "PIL.ImagePath.Path") {
            o.require(report.findings.size() == 1 && !report.findings[0].also.empty(),
                      fmt::format("{}: shared path should carry both advisories", c.advisory));
        }
        const auto sibling = sanitizer::sanitize(fenced(mention_only(c.snippet)), cat);
        o.require(!sibling.failed(), fmt::format("{}: sibling did not parse", c.advisory));
        if (!sibling.findings.empty()) {
            ++false_positives;
            o.require(false, fmt::format("{}: sibling produced {}", c.advisory, sibling.findings[0].api_path.dotted()));
        }
    }
    const double secs = seconds_since(start);
    o.require(rows == 30 && advisories_seen.size() == 30, "expected 30 distinct advisories");
    o.require(secs < 5.0, fmt::format("took {:.2f} s", secs));
    o.summary = fmt::format("recall {}/{}, false positives {}/{}, {:.1f} ms", hits, rows, false_positives, rows, secs * 1000);
    return o;
}

// ------------------------------------------------------------------ AC2

Outcome ac2_grace() {
    Outcome o;
    const std::map<std::string, std::optional<long>> expected = {
        {"pandas", 493}, {"Pillow", 104}, {"scipy", 178}, {"tornado", 1550}, {"urllib3", std::nullopt}};
    miner::MineOptions opts;
    opts.diagnostics = null_sink();
    std::optional<long> overall;
    std::vector<std::string> parts;
    for (const auto& [pkg, days] : expected) {
        const auto set =
            miner::mine_repository(miner::load_history_fixture(kData / "miner" / "grace" / (pkg + ".json")), opts);
        o.require(!set.deprecated.empty(), pkg + ": no deprecation found");
        std::optional<long> shortest;
        for (const auto& [key, cand] : set.deprecated) {
            if (auto g = cand.grace_days()) shortest = shortest ? std::min(*shortest, *g) : *g;
        }
        o.require(shortest == days, fmt::format("{}: got {}", pkg, shortest ? std::to_string(*shortest) : "none"));
        parts.push_back(fmt::format("{}={}", pkg, shortest ? std::to_string(*shortest) : "not removed yet"));
        if (shortest) overall = overall ? std::min(*overall, *shortest) : *shortest;
    }
    o.require(overall == 104, "minimum over removed APIs should be 104");
    o.summary = fmt::format("{}; min {}", fmt::join(parts, ", "), overall ? std::to_string(*overall) : "none");
    return o;
}

// ------------------------------------------------------------------ AC3

Outcome ac3_miner_oracle() {
    Outcome o;
    const auto start = Clock::now();
    miner::MineOptions opts;
    opts.diagnostics = null_sink();
    int repos = 0;
    std::size_t candidates = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto h = testing::synth::Generator(seed).generate(20, 5);
        const auto expected = testing::synth::oracle_candidates(h);
        for (bool parallel : {false, true}) {
            opts.parallel = parallel;
            o.require(miner::mine_repository(h.records, opts) == expected,
                      fmt::format("seed {} ({}) differs from oracle", seed, parallel ? "parallel" : "serial"));
        }
        candidates += expected.deprecated.size() + expected.usage_modified.size();
        ++repos;
    }
    // Same comparison through a real git checkout when git is present.
    std::string git_note = "git unavailable";
    const auto h = testing::synth::Generator(99).generate(20, 4);
    const auto dir = fs::temp_directory_path() / fmt::format("apilot_accept_git_{}", ::getpid());
    const auto ids = testing::synth::write_git_repo(h, dir);
    if (!ids.empty()) {
        o.require(miner::mine_repository(miner::read_history(dir), opts) == testing::synth::oracle_candidates(h, ids),
                  "git checkout differs from oracle");
        git_note = "git checkout matched";
        ++repos;
    }
    fs::remove_all(dir);
    const double secs = seconds_since(start);
    o.require(secs < 10.0, fmt::format("took {:.2f} s", secs));
    o.summary = fmt::format("{} repositories of 20 commits equal to oracle ({} candidates), {}, {:.2f} s", repos,
                            candidates, git_note, secs);
    return o;
}

// ------------------------------------------------------------------ AC4

// Release tuple as the gate defines it: leading dotted digits, trailing
// zeros dropped.
std::vector<long> release_of(const std::string& text) {
    static const std::regex lead(R"(^\d+(\.\d+)*)");
    std::smatch m;
    std::vector<long> parts;
    if (std::regex_search(text, m, lead)) {
        std::stringstream ss(m.str());
        for (std::string p; std::getline(ss, p, '.');) parts.push_back(std::stol(p));
    }
    while (!parts.empty() && parts.back() == 0) parts.pop_back();
    return parts;
}

struct GateModel {
    std::vector<std::pair<std::string, std::optional<std::string>>> affected;
    const std::vector<pyparse::StmtPtr>* affected_branch = nullptr;
    const std::vector<pyparse::StmtPtr>* other_branch = nullptr;
};

std::optional<std::string> string_constant(const pyparse::Expr& e) {
    if (e.kind != pyparse::ExprKind::Constant || e.constant != pyparse::ConstKind::string) return std::nullopt;
    std::string value;
    for (auto piece : pyparse::split_string_pieces(e.text)) {
        auto d = pyparse::decode_string_piece(piece);
        if (!d) return std::nullopt;
        value += d->value;
    }
    return value;
}

GateModel read_gate(const pyparse::Module& m) {
    GateModel g;
    for (const auto& s : m.body) {
        if (s->kind == pyparse::StmtKind::Assign && s->targets.size() == 1 &&
            s->targets[0]->kind == pyparse::ExprKind::Name && s->targets[0]->text == "AFFECTED") {
            for (const auto& item : s->value->items) {
                if (item->kind != pyparse::ExprKind::Tuple || item->items.size() != 2) throw Error("bad AFFECTED item");
                auto lo = string_constant(*item->items[0]);
                if (!lo) throw Error("AFFECTED lower bound is not a string");
                g.affected.emplace_back(*lo, string_constant(*item->items[1]));
            }
        }
        if (s->kind == pyparse::StmtKind::If && s->value->kind == pyparse::ExprKind::Call &&
            pyparse::canonical(*s->value->items[0]) == "_is_affected") {
            g.affected_branch = &s->body;
            g.other_branch = &s->orelse;
        }
    }
    if (g.affected.empty() || !g.affected_branch) throw Error("gate lacks AFFECTED or the version test");
    return g;
}

bool branch_calls(const std::vector<pyparse::StmtPtr>& body, std::string_view callee) {
    bool found = false;
    for (const auto& s : body) {
        pyparse::for_each_stmt_expr(*s, [&](const pyparse::Expr& root) {
            pyparse::walk_exprs(root, [&](const pyparse::Expr& e) {
                if (e.kind == pyparse::ExprKind::Call && pyparse::canonical(*e.items[0]) == callee) found = true;
            });
        });
    }
    return found;
}

std::string run_gate_with_python(const std::string& gate, const std::string& fake_version) {
    const auto dir = fs::temp_directory_path() / fmt::format("apilot_accept_gate_{}", ::getpid());
    fs::create_directories(dir / "pandas");
    std::ofstream(dir / "pandas" / "__init__.py") << "def read_pickle(p):\n    print('vulnerable-path')\n"
                                                     "def read_csv(p):\n    print('clean-path')\n";
    std::ofstream(dir / "run.py") << "import importlib.metadata as m\n"
                                     "m.version = lambda name: "
                                  << nlohmann::json(fake_version).dump()
                                  << "\nimport sys\n"
                                     "exec(compile(open(sys.argv[1]).read(), 'gate', 'exec'), {'__name__': '__main__'})\n";
    std::ofstream(dir / "gate.py") << gate;
    std::string out;
    const auto cmd = fmt::format("cd '{}' && python3 run.py gate.py 2>&1", dir.string());
    if (FILE* p = ::popen(cmd.c_str(), "r")) {
        char buf[512];
        while (std::fgets(buf, sizeof buf, p)) out += buf;
        ::pclose(p);
    }
    fs::remove_all(dir);
    return out;
}

Outcome ac4_version_gate() {
    Outcome o;
    const auto& cat = fixture_catalog();
    const catalog::OutdatedApiRecord* record = nullptr;
    for (auto i : cat.find_by_path("pandas.read_pickle")) {
        if (cat.at(i).advisory_id() == "CVE-2020-13901") record = &cat.at(i);
    }
    if (!record) {
        o.require(false, "CVE-2020-13901 not in the fixture catalog");
        return o;
    }
    const guardrail::VersionGate gate{record->package, record->api_path, record->patched()->affected_ranges,
                                      "import pandas as pd\ndf = pd.read_pickle(\"data.pkl\")",
                                      "import pandas as pd\ndf = pd.read_csv(\"data.csv\")"};
    const auto source = guardrail::emit_version_gate(gate);
    auto parsed = pyparse::try_parse_module(source);
    if (!std::holds_alternative<pyparse::Module>(parsed)) {
        o.require(false, "gate does not parse: " + std::get<pyparse::ParseFailure>(parsed).message);
        return o;
    }
    const auto model = read_gate(std::get<pyparse::Module>(parsed));
    auto affected = [&](const std::string& v) {
        const auto rel = release_of(v);
        return std::any_of(model.affected.begin(), model.affected.end(), [&](const auto& r) {
            return release_of(r.first) <= rel && (!r.second || rel < release_of(*r.second));
        });
    };
    o.require(branch_calls(*model.affected_branch, "pd.read_csv") &&
                  !branch_calls(*model.affected_branch, "pd.read_pickle"),
              "affected branch should hold the clean snippet");
    o.require(branch_calls(*model.other_branch, "pd.read_pickle"), "other branch should hold the original snippet");
    const bool at_103 = affected("1.0.3");
    const bool at_104 = affected("1.0.4");
    o.require(at_103, "1.0.3 should select the clean branch");
    o.require(!at_104, "1.0.4 should select the vulnerable branch");

    std::string python_note = "python3 unavailable";
    if (std::system("python3 -c 'import importlib.metadata' >/dev/null 2>&1") == 0) {
        const auto out103 = run_gate_with_python(source, "1.0.3");
        const auto out104 = run_gate_with_python(source, "1.0.4");
        o.require(out103.find("clean-path") != std::string::npos && out103.find("vulnerable-path") == std::string::npos,
                  "python at 1.0.3: " + out103);
        o.require(out104.find("vulnerable-path") != std::string::npos && out104.find("clean-path") == std::string::npos,
                  "python at 1.0.4: " + out104);
        python_note = "python3 agrees";
    }
    std::vector<std::string> ranges;
    for (const auto& [lo, hi] : model.affected) ranges.push_back(fmt::format("[{}, {})", lo, hi.value_or("inf")));
    o.summary = fmt::format("affected {}; 1.0.3 -> {}, 1.0.4 -> {}; {}", fmt::join(ranges, " "),
                            at_103 ? "clean" : "vulnerable", at_104 ? "clean" : "vulnerable", python_note);
    return o;
}

// ------------------------------------------------------------------ AC5

Outcome ac5_loop_bounds() {
    Outcome o;
    const auto& cat = fixture_catalog();
    const guardrail::GenerationConfig config;  // defaults
    o.require(config.max_iterations == 3, "default iteration bound should be 3");

    const std::string pickle_code = "import pandas as pd\ndf = pd.read_pickle(\"d.pkl\")";
    const std::string yaml_code = "import yaml\ncfg = yaml.safe_load(open(\"c.yml\"))\nraw = yaml.load(open(\"c.yml\"))";
    const std::string all_code =
        "import joblib\nimport yaml\nimport pandas as pd\n"
        "m = joblib.load(\"m.pkl\")\ncfg = yaml.load(open(\"c.yml\"))\ndf = pd.read_pickle(\"d.pkl\")";
    const std::string clean_code = "import pandas as pd\ndf = pd.read_parquet(\"d.parquet\")";

    guardrail::TranscriptClient second_clean({fenced(pickle_code), fenced(clean_code)});
    const auto a = guardrail::generate_guarded("Load the dataframe.", second_clean, cat, config);
    o.require(a.status == guardrail::SessionStatus::clean, "(a) status should be clean");
    o.require(second_clean.calls() == 2, fmt::format("(a) {} calls", second_clean.calls()));
    o.require(a.cumulative_ban_list == std::vector<ApiPath>{ApiPath::parse("pandas.read_pickle")},
              fmt::format("(a) ban list of {}", a.cumulative_ban_list.size()));
    o.require(second_clean.prompts().size() == 2 &&
                  second_clean.prompts()[1].find("pandas.read_pickle") != std::string::npos,
              "(a) second prompt should carry the ban list");

    guardrail::TranscriptClient never_clean({fenced(pickle_code), fenced(yaml_code), fenced(all_code), fenced(clean_code)});
    const auto b = guardrail::generate_guarded("Load everything.", never_clean, cat, config);
    o.require(b.status == guardrail::SessionStatus::exhausted, "(b) status should be exhausted");
    o.require(never_clean.calls() == 3, fmt::format("(b) {} calls", never_clean.calls()));
    o.require(!b.warnings.empty(), "(b) no warnings");
    for (const char* api : {"pandas.read_pickle", "yaml.load", "joblib.load"}) {
        const bool named = std::any_of(b.warnings.begin(), b.warnings.end(),
                                       [&](const std::string& w) { return w.find(api) != std::string::npos; });
        o.require(named, fmt::format("(b) no warning names {}", api));
    }
    o.summary = fmt::format("(a) {} after {} calls, ban list {}; (b) {} after {} calls, {} warnings",
                            guardrail::to_string(a.status), second_clean.calls(), a.cumulative_ban_list.size(),
                            guardrail::to_string(b.status), never_clean.calls(), b.warnings.size());
    return o;
}

// ------------------------------------------------------------------ AC6

Outcome ac6_metrics() {
    Outcome o;
    const double dep = eval::reduction_rate(0.2878, 0.0424);
    const double usage = eval::reduction_rate(0.5336, 0.0569);
    o.require(std::abs(dep - 85.27) <= 0.01, fmt::format("deprecated mean {:.4f}", dep));
    o.require(std::abs(usage - 89.34) <= 0.01, fmt::format("usage-modified mean {:.4f}", usage));

    const auto& cat = fixture_catalog();
    std::mt19937_64 rng(2024);
    int checked = 0, strict = 0;
    for (int set = 0; set < 1000; ++set) {
        const int n_entries = 1 + static_cast<int>(rng() % 4);
        std::vector<eval::BenchmarkEntry> bench;
        std::set<std::string> used;
        while (static_cast<int>(bench.size()) < n_entries) {
            const auto& c = kDetection[rng() % std::size(kDetection)];
            if (!used.insert(c.api).second) continue;
            const auto& rec = cat.at(cat.find_by_path(c.api).front());
            bench.push_back({ApiPath::parse(c.api), catalog::ApiKind::patched, "Use it.", rec.package});
        }
        auto transcripts = std::make_shared<guardrail::TranscriptSet>();
        auto reply = [&](const eval::BenchmarkEntry& e) -> std::string {
            const auto& target =
                *std::find_if(std::begin(kDetection), std::end(kDetection),
                              [&](const DetectionCase& c) { return ApiPath::parse(c.api) == e.target_api; });
            const auto& other = kDetection[rng() % std::size(kDetection)];
            switch (rng() % 6) {
                case 0: return fenced(target.snippet);
                case 1: return fenced(other.snippet);
                case 2: return fenced(std::string(target.snippet) + other.snippet);
                case 3: return fenced("import json\nprint(json.dumps({'ok': 1}))");
                case 4: return std::string(target.snippet);  // no fence
                default: return fenced("def broken(:\n    pass");
            }
        };
        eval::TrialOptions opts;
        opts.trials_per_entry = 1 + static_cast<int>(rng() % 4);
        opts.modes = rng() % 2 ? std::vector{eval::TrialMode::vanilla}
                               : std::vector{eval::TrialMode::vanilla, eval::TrialMode::guarded};
        opts.parallel = false;
        for (std::size_t i = 0; i < bench.size(); ++i) {
            for (auto mode : opts.modes) {
                for (int t = 0; t < opts.trials_per_entry; ++t) {
                    const auto keys = eval::transcript_keys(bench[i], {i, t, mode});
                    transcripts->keyed[keys.front()] = {reply(bench[i]), reply(bench[i]), reply(bench[i])};
                }
            }
        }
        const eval::ClientFactory factory = [transcripts](const eval::BenchmarkEntry& e, const eval::TrialKey& k) {
            return std::make_unique<guardrail::TranscriptClient>(transcripts->lookup(eval::transcript_keys(e, k)));
        };
        const auto results = eval::run_trials(bench, factory, cat, opts);
        auto compare = [&](std::span<const eval::TrialResult> rs, const std::string& where) {
            const auto f = eval::f_api(rs);
            const auto fp = eval::f_api_plus(rs);
            if (f.has_value() != fp.has_value()) {
                o.require(false, fmt::format("set {} {}: definedness differs", set, where));
                return;
            }
            if (!f) return;
            ++checked;
            if (*fp > *f) ++strict;
            o.require(*fp >= *f, fmt::format("set {} {}: F_API+ {} < F_API {}", set, where, *fp, *f));
        };
        compare(results, "all");
        for (std::size_t i = 0; i < bench.size(); ++i) {
            for (auto mode : opts.modes) compare(eval::select(results, i, mode), fmt::format("entry {}", i));
        }
        const auto report = eval::compute_report(bench, results);
        for (const auto& k : report.per_kind) {
            if (k.f_api_mean && k.f_api_plus_mean) {
                o.require(*k.f_api_plus_mean >= *k.f_api_mean, fmt::format("set {}: kind mean inverted", set));
            }
        }
    }
    o.summary = fmt::format("R_r {:.2f}% and {:.2f}%; F_API+ >= F_API on 1000 sets ({} rates compared, {} strict)", dep,
                            usage, checked, strict);
    return o;
}

// ------------------------------------------------------------------ AC7

std::vector<std::string> sample_programs(int n) {
    static const auto cat = testing::synth::make_catalog(300, 5);
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) {
        if (i % 2 == 0) {
            out.push_back(testing::synth::make_snippet(cat, 10 + i % 40, static_cast<std::uint64_t>(i)));
        } else {
            std::string code = kDetection[static_cast<std::size_t>(i) % std::size(kDetection)].snippet;
            out.push_back(code);
        }
    }
    return out;
}

// Conforming replies: one complete fenced block, with the styles models use.
std::string conforming(const std::string& code, int style) {
    auto crlf = [](std::string s) {
        std::string r;
        for (char ch : s) r += ch == '\n' ? std::string("\r\n") : std::string(1, ch);
        return r;
    };
    switch (style % 8) {
        case 0: return "```python\n" + code + "```";
        case 1: return "Here is the code:\n\n```python\n" + code + "```\n\nIt reads the file.";
        case 2: return "```py\n" + code + "```\n";
        case 3: return "```\n" + code + "```";
        case 4: return crlf("Sure.\r\n```python\n" + code + "```\n");
        case 5: return "````python\n" + code + "````\n";
        case 6: {
            std::string indented;
            std::istringstream in(code);
            for (std::string l; std::getline(in, l);) indented += "  " + l + "\n";
            return "Steps:\n\n  ```python\n" + indented + "  ```\n";
        }
        default: return "```Python title=\"main.py\"\n" + code + "```   \n";
    }
}

// Replies that omit a usable fence.
std::string fence_omitting(const std::string& code, int style) {
    switch (style % 5) {
        case 0: return code;
        case 1: return "Here is the code:\n\n" + code + "\nHope this helps.";
        case 2: return "```python\n" + code;  // never closed
        case 3: return "Use `" + code.substr(0, code.find('\n')) + "` then call it.";
        default: return "```python\n   \n```\nThe snippet is:\n" + code;  // only block is blank
    }
}

std::mt19937_64& rng7() {
    static std::mt19937_64 rng(77);
    return rng;
}

catalog::OutdatedApiRecord random_record(std::mt19937_64& rng, int serial) {
    using namespace catalog;
    auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
    auto date = [&] { return Date::parse(fmt::format("{}-{:02}-{:02}", 1995 + pick(35), 1 + pick(12), 1 + pick(28))); };
    auto version = [&] { return Version::parse(fmt::format("{}.{}.{}", pick(5), pick(20), pick(10))); };
    const auto pkg = PackageId::pypi(fmt::format("lib{}", pick(6)));
    std::vector<std::string> segs{pkg.name()};
    for (int i = 0, depth = 1 + pick(3); i < depth; ++i) segs.push_back(fmt::format("m{}", pick(4)));
    segs.push_back(fmt::format("f{}", serial));
    const ApiPath path(segs);
    switch (pick(3)) {
        case 0: {
            PatchedInfo p;
            p.advisory_id = fmt::format("GHSA-{}-{}", serial, pick(1000));
            for (int i = 0, n = 1 + pick(3); i < n; ++i) {
                auto lo = version();
                std::optional<Version> hi;
                if (pick(4)) hi = Version::parse(fmt::format("{}.{}", 5 + pick(5), pick(10)));
                p.affected_ranges.push_back(VersionRange{lo, hi});
            }
            p.bug_type = pick(4) ? std::string("Kind \"") + std::to_string(pick(50)) + "\" \\ é" : "";
            if (pick(3)) p.cvss = pick(101) / 10.0;
            return {path, pkg, p};
        }
        case 1: {
            DeprecatedInfo d;
            d.deprecated_date = date();
            if (pick(2)) d.removed_date = Date::from_days(d.deprecated_date.days() + std::chrono::days(pick(2000)));
            if (pick(2)) d.deprecated_in = version();
            if (pick(2)) d.removed_in = version();
            d.evidence_commit = fmt::format("{:016x}{:016x}", rng(), rng());
            return {path, pkg, d};
        }
        default: {
            UsageModifiedInfo u;
            u.change = static_cast<UsageChange>(pick(3));
            u.old_signature = fmt::format("f{}(a, b={})", serial, pick(9));
            if (u.change != UsageChange::removed && pick(4)) u.new_signature = fmt::format("f{}(a, *, b)", serial);
            u.evidence_commit = fmt::format("{:040x}", rng());
            u.evidence_date = date();
            return {path, pkg, u};
        }
    }
}

Outcome ac7_extraction_and_persistence() {
    Outcome o;
    const auto& cat = fixture_catalog();

    // Conforming corpus through the harness metric.
    const auto programs = sample_programs(200);
    std::vector<eval::BenchmarkEntry> bench{
        {ApiPath::parse("pandas.read_pickle"), catalog::ApiKind::patched, "Load data.", catalog::PackageId::pypi("pandas")}};
    std::vector<std::string> replies;
    for (std::size_t i = 0; i < programs.size(); ++i) replies.push_back(conforming(programs[i], static_cast<int>(i)));
    auto set = std::make_shared<guardrail::TranscriptSet>();
    for (std::size_t i = 0; i < replies.size(); ++i) {
        set->keyed[fmt::format("pandas.read_pickle/vanilla/{}", i)] = {replies[i]};
    }
    eval::TrialOptions opts;
    opts.trials_per_entry = static_cast<int>(replies.size());
    opts.modes = {eval::TrialMode::vanilla};
    const eval::ClientFactory factory = [set](const eval::BenchmarkEntry& e, const eval::TrialKey& k) {
        return std::make_unique<guardrail::TranscriptClient>(set->lookup(eval::transcript_keys(e, k)));
    };
    const auto results = eval::run_trials(bench, factory, cat, opts);
    const auto extract = eval::extract_rate(results);
    const auto parse = eval::parse_rate(results);
    o.require(extract && *extract == 1.0, fmt::format("ExtractRate {}", extract.value_or(-1)));
    o.require(parse && *parse == 1.0, fmt::format("ParseRate {}", parse.value_or(-1)));
    int exact = 0;
    for (std::size_t i = 0; i < programs.size(); ++i) {
        // Block content is the lines between the fences, without a final newline.
        auto expected = programs[i];
        while (!expected.empty() && expected.back() == '\n') expected.pop_back();
        const auto snip = sanitizer::extract_code(replies[i]);
        if (snip.code == expected) ++exact;
        else o.require(false, fmt::format("sample {} (style {}) extracted different code", i, i % 8));
    }

    // Fence-omitting corpus.
    int rejected = 0;
    for (std::size_t i = 0; i < programs.size(); ++i) {
        const auto reply = fence_omitting(programs[i], static_cast<int>(i));
        try {
            (void)sanitizer::extract_code(reply);
            o.require(false, fmt::format("fence-omitting sample {} (style {}) was extracted", i, i % 5));
        } catch (const ExtractionFailed&) {
            ++rejected;
        }
        const auto report = sanitizer::sanitize(reply, cat);
        o.require(report.extraction == sanitizer::StageStatus::failed,
                  fmt::format("fence-omitting sample {} passed sanitizer extraction", i));
    }

    // Catalog persistence.
    auto& rng = rng7();
    int round_trips = 0;
    const auto dir = fs::temp_directory_path() / fmt::format("apilot_accept_cat_{}", ::getpid());
    fs::create_directories(dir);
    for (int c = 0; c < 500; ++c) {
        std::vector<catalog::OutdatedApiRecord> records;
        const int n = static_cast<int>(rng() % 40);
        for (int i = 0; i < n; ++i) records.push_back(random_record(rng, i));
        const ApiCatalog original(std::move(records), c % 3 ? fmt::format("2026-01-{:02}T00:00:00Z", 1 + c % 28) : "");
        const auto text = catalog::catalog_to_string(original);
        const auto back = catalog::catalog_from_string(text);
        bool ok = back == original && catalog::catalog_to_string(back) == text;
        if (c % 10 == 0) {
            const auto file = dir / fmt::format("c{}.json", c);
            catalog::catalog_save(original, file);
            ok = ok && catalog::catalog_load(file) == original;
        }
        if (ok) ++round_trips;
        else o.require(false, fmt::format("catalog {} did not round-trip", c));
    }
    fs::remove_all(dir);
    o.summary = fmt::format("ExtractRate {:.2f} over {} fenced samples ({} exact), {}/{} fence-omitting rejected, "
                            "{}/500 catalogs round-tripped",
                            extract.value_or(0), replies.size(), exact, rejected, programs.size(), round_trips);
    return o;
}

// ------------------------------------------------------------------ AC8

Outcome ac8_performance() {
    Outcome o;
    const auto cat = testing::synth::make_catalog(10'000, 3);
    o.require(cat.catalog.size() >= 10'000, "catalog too small");
    const int samples = 50;
    double total = 0, worst = 0;
    std::size_t findings = 0;
    for (int i = 0; i < samples; ++i) {
        const auto code = testing::synth::make_snippet(cat, 200, 500 + static_cast<std::uint64_t>(i));
        o.require(std::count(code.begin(), code.end(), '\n') == 200, "snippet is not 200 lines");
        const auto text = fenced(code);
        const auto start = Clock::now();
        const auto report = sanitizer::sanitize(text, cat.catalog);
        const double secs = seconds_since(start);
        o.require(!report.failed(), fmt::format("snippet {} failed to sanitize", i));
        findings += report.findings.size();
        total += secs;
        worst = std::max(worst, secs);
    }
    const double mean = total / samples;
    o.require(mean < 0.5, fmt::format("mean {:.3f} s", mean));
    o.require(findings > 0, "synthetic snippets produced no findings");
    o.summary = fmt::format("{} records, {} snippets of 200 lines: mean {:.2f} ms, max {:.2f} ms, {} findings",
                            cat.catalog.size(), samples, mean * 1000, worst * 1000, findings);
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"AC1 detection fixtures", ac1_detection},
        {"AC2 grace periods", ac2_grace},
        {"AC3 miner oracle", ac3_miner_oracle},
        {"AC4 version gate", ac4_version_gate},
        {"AC5 guardrail loop bounds", ac5_loop_bounds},
        {"AC6 metric arithmetic", ac6_metrics},
        {"AC7 extraction and persistence", ac7_extraction_and_persistence},
        {"AC8 sanitize performance", ac8_performance},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o.problems.push_back(std::string("exception: ") + e.what());
        }
        const bool pass = o.problems.empty();
        if (!pass) ++failed;
        std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << o.summary << '\n';
        for (std::size_t i = 0; i < o.problems.size() && i < 10; ++i) std::cout << "    " << o.problems[i] << '\n';
        if (o.problems.size() > 10) std::cout << "    ... " << o.problems.size() - 10 << " more\n";
    }
    std::cout << fmt::format("{}/{} criteria passed\n", criteria.size() - static_cast<std::size_t>(failed),
                             criteria.size());
    return failed == 0 ? 0 : 1;
}
