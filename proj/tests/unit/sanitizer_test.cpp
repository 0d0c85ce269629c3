#include "apilot/common/error.hpp"
#include "apilot/sanitizer/sanitize.hpp"

#include <json.hpp>

#include <fmt/format.h>
#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <sstream>

using namespace apilot;
using namespace apilot::sanitizer;
using namespace apilot::catalog;

namespace {

OutdatedApiRecord patched(std::string_view path, std::string_view package, std::string_view id,
                          std::string_view fixed = "1.0.4", double cvss = 9.8) {
    PatchedInfo p;
    p.advisory_id = std::string(id);
    p.affected_ranges = {VersionRange{Version::parse("0"), Version::parse(fixed)}};
    p.bug_type = "Buffer Overflow";
    p.cvss = cvss;
    return {ApiPath::parse(path), PackageId::pypi(package), p};
}

OutdatedApiRecord deprecated(std::string_view path, std::string_view package) {
    DeprecatedInfo d;
    d.deprecated_date = Date::parse("2021-07-08");
    d.evidence_commit = "c0ffee";
    return {ApiPath::parse(path), PackageId::pypi(package), d};
}

OutdatedApiRecord removed(std::string_view path, std::string_view package) {
    UsageModifiedInfo u;
    u.change = UsageChange::removed;
    u.old_signature = "to_numpy_matrix(G)";
    u.evidence_commit = "beef";
    u.evidence_date = Date::parse("2022-08-13");
    return {ApiPath::parse(path), PackageId::pypi(package), u};
}

ApiCatalog base_catalog() {
    return ApiCatalog({
        patched("pandas.read_pickle", "pandas", "CVE-2020-13901"),
        patched("yaml.load", "pyyaml", "CVE-2017-18342", "5.1"),
        patched("PIL.ImagePath.Path", "pillow", "CVE-2022-22815", "9.0.0", 6.5),
        patched("PIL.ImagePath.Path", "pillow", "CVE-2022-22816", "9.0.0", 6.5),
        patched("tornado.web.RequestHandler.set_header", "tornado", "CVE-2012-2374", "2.2.1", 5.0),
        patched("hashlib.md5", "hashlib", "TEST-md5"),
        deprecated("ssl.PROTOCOL_TLSv1_2", "ssl"),
        deprecated("networkx.to_numpy_matrix", "networkx"),
        removed("networkx.convert_matrix.to_numpy_matrix", "networkx"),
        patched("numpy.pad", "numpy", "CVE-2017-12852", "1.13.2", 7.5),
        patched("tensorflow.math.segment_sum", "tensorflow", "CVE-2021-41195", "2.4.4", 5.5),
    });
}

std::vector<Finding> detect(std::string_view code, const ApiCatalog& cat, const UserVersions& v = {}) {
    const auto module = pyparse::parse_module(code);
    return detect_outdated(module, resolve_bindings(module), cat, v);
}

std::vector<std::pair<std::string, int>> sites(const std::vector<Finding>& findings) {
    std::vector<std::pair<std::string, int>> out;
    for (const auto& f : findings) out.emplace_back(f.api_path.dotted(), f.site.begin.line);
    return out;
}

using Sites = std::vector<std::pair<std::string, int>>;

}  // namespace

// ---------------------------------------------------------------- extraction

TEST(Extract, CanonicalFence) {
    const auto s = extract_code("```\nx=1\n```");
    EXPECT_EQ(s.code, "x=1");
    EXPECT_FALSE(s.fence_language_tag);
    EXPECT_EQ(s.block_index, 0);
    EXPECT_EQ(s.total_blocks, 1);
}

TEST(Extract, ProseAroundTaggedFence) {
    const auto s = extract_code("Sure! Here is the code:\n\n```python\nimport os\nprint(os.sep)\n```\nHope it helps.");
    EXPECT_EQ(s.code, "import os\nprint(os.sep)");
    EXPECT_EQ(s.fence_language_tag, "python");
}

TEST(Extract, MissingClosingFenceFails) {
    EXPECT_THROW(extract_code("```python\nimport pandas as pd\npd.read_pickle(p)\n"), ExtractionFailed);
    EXPECT_THROW(extract_code("import pandas as pd\npd.read_pickle(p)\n"), ExtractionFailed);
    EXPECT_THROW(extract_code("```\n\n   \n```"), ExtractionFailed);
    EXPECT_THROW(extract_code("use ```x = 1``` inline"), ExtractionFailed);
}

TEST(Extract, PrefersLongestParsingBlock) {
    const std::string text =
        "```\nshort = 1\n```\n"
        "```python\ndef broken(:\n    pass  # this block is the longest one\n```\n"
        "```py\nimport os\nvalue = os.getcwd()\n```\n";
    const auto s = extract_code(text);
    EXPECT_EQ(s.code, "import os\nvalue = os.getcwd()");
    EXPECT_EQ(s.block_index, 2);
    EXPECT_EQ(s.total_blocks, 3);
    EXPECT_EQ(s.fence_language_tag, "py");
}

TEST(Extract, FallsBackToLongestBlock) {
    const auto s = extract_code("```\ndef a(:\n```\n```\ndef longer(:\n    x\n```\n");
    EXPECT_EQ(s.code, "def longer(:\n    x");
    EXPECT_EQ(s.block_index, 1);
}

TEST(Extract, FenceDetails) {
    // Indented fence inside a list item, longer fences, CRLF line ends.
    EXPECT_EQ(extract_code("1. step\n   ```python\n   if x:\n       y()\n   ```\n").code, "if x:\n    y()");
    EXPECT_EQ(extract_code("````\n```\ninner\n```\n````").code, "```\ninner\n```");
    EXPECT_EQ(extract_code("```python\r\nx = 1\r\n```\r\n").code, "x = 1");
    // An unterminated trailing fence does not hide an earlier complete block.
    EXPECT_EQ(extract_code("```\na = 1\n```\nand also\n```\nb = 2\n").code, "a = 1");
}

ExtractedSnippet snippet(std::string code) {
    ExtractedSnippet s;
    s.code = std::move(code);
    return s;
}

TEST(Parse, OnlySyntaxErrorsFail) {
    EXPECT_TRUE(std::holds_alternative<pyparse::Module>(parse_snippet(snippet("x = undefined_name + 1"))));
    const auto bad = parse_snippet(snippet("def f(:"));
    ASSERT_TRUE(std::holds_alternative<pyparse::ParseFailure>(bad));
    EXPECT_EQ(std::get<pyparse::ParseFailure>(bad).where.line, 1);
    const auto ok = parse_snippet(snippet("import pandas as pd\ndef load_pickled_object(file_path):\n"
                                          "    return pd.read_pickle(file_path)\n"));
    EXPECT_TRUE(std::holds_alternative<pyparse::Module>(ok));
}

// ------------------------------------------------------------------ bindings

TEST(Bindings, Forms) {
    const auto m = pyparse::parse_module(
        "import pandas as pd\n"
        "import os.path\n"
        "from networkx import degree_mixing_matrix as dmm, Graph\n"
        "from yaml import *\n"
        "from . import sibling\n"
        "def f():\n"
        "    import numpy.linalg as la\n");
    const auto b = resolve_bindings(m);
    ASSERT_EQ(b.size(), 6u);
    EXPECT_EQ(b[0].local_name, "pd");
    EXPECT_EQ(b[0].target.dotted(), "pandas");
    EXPECT_EQ(b[0].form, BindingForm::aliased_module);
    EXPECT_EQ(b[1].local_name, "os");
    EXPECT_EQ(b[1].target.dotted(), "os");
    EXPECT_EQ(b[1].form, BindingForm::module_import);
    EXPECT_EQ(b[2].local_name, "dmm");
    EXPECT_EQ(b[2].target.dotted(), "networkx.degree_mixing_matrix");
    EXPECT_EQ(b[2].form, BindingForm::aliased_from);
    EXPECT_EQ(b[3].local_name, "Graph");
    EXPECT_EQ(b[3].form, BindingForm::from_import);
    EXPECT_EQ(b[4].local_name, "*");
    EXPECT_EQ(b[4].target.dotted(), "yaml");
    EXPECT_EQ(b[4].form, BindingForm::star_import);
    EXPECT_EQ(b[5].local_name, "la");
    EXPECT_EQ(b[5].target.dotted(), "numpy.linalg");
    EXPECT_EQ(b[5].where.line, 7);
    EXPECT_TRUE(resolve_bindings(pyparse::parse_module("x = 1\n")).empty());
}

// ----------------------------------------------------------------- detection

TEST(Detect, AliasedCallInsideFunction) {
    const auto cat = base_catalog();
    const auto f = detect("import pandas as pd\ndef load_pickled_object(file_path):\n"
                          "    return pd.read_pickle(file_path)\n",
                          cat);
    ASSERT_EQ(f.size(), 1u);
    EXPECT_EQ(f[0].api_path.dotted(), "pandas.read_pickle");
    EXPECT_EQ(f[0].record.advisory_id(), "CVE-2020-13901");
    EXPECT_EQ(f[0].site.begin, (pyparse::Position{3, 11}));
    EXPECT_NE(f[0].resolution_chain.find("pd -> pandas"), std::string::npos);
    EXPECT_NE(f[0].reason.find("CVE-2020-13901"), std::string::npos);
}

TEST(Detect, StringsAndCommentsNeverMatch) {
    const auto cat = base_catalog();
    EXPECT_TRUE(detect("def warning():\n    print(\"hashlib.md5() is insecure, use hashlib.sha256() instead\")\n", cat)
                    .empty());
    EXPECT_TRUE(detect("import hashlib\n# hashlib.md5(b'x')\ns = 'hashlib.md5(b\"x\")'\nhashlib.sha256(b'x')\n", cat)
                    .empty());
    EXPECT_EQ(detect("import hashlib\nh = hashlib.md5(b'x')\n", cat).size(), 1u);
}

TEST(Detect, AttributeConstant) {
    const auto f = detect("import ssl\nssl_version = ssl.PROTOCOL_TLSv1_2\n", base_catalog());
    ASSERT_EQ(f.size(), 1u);
    EXPECT_EQ(f[0].record.kind(), ApiKind::deprecated);
    EXPECT_NE(f[0].reason.find("not yet removed"), std::string::npos);
}

TEST(Detect, FromImportsAndDeepModules) {
    const auto cat = base_catalog();
    EXPECT_EQ(sites(detect("from pandas import read_pickle as rp\nrp('f')\n", cat)), (Sites{{"pandas.read_pickle", 2}}));
    EXPECT_EQ(sites(detect("import tensorflow as tf\ntf.math.segment_sum(d, s)\n", cat)),
              (Sites{{"tensorflow.math.segment_sum", 2}}));
    EXPECT_EQ(sites(detect("from tensorflow import math\nmath.segment_sum(d, s)\n", cat)),
              (Sites{{"tensorflow.math.segment_sum", 2}}));
    EXPECT_EQ(sites(detect("import networkx.convert_matrix\nnetworkx.convert_matrix.to_numpy_matrix(G)\n", cat)),
              (Sites{{"networkx.convert_matrix.to_numpy_matrix", 2}}));
    // Mentioning the name without calling or dotting it is not a use.
    EXPECT_TRUE(detect("from pandas import read_pickle\nloaders = [read_pickle]\n", cat).empty());
}

TEST(Detect, OneFindingPerSiteWithSeveralRecords) {
    const auto f = detect("from PIL import ImagePath\np = ImagePath.Path([(0, 0), (1, 1)])\np.getbbox()\n",
                          base_catalog());
    ASSERT_EQ(f.size(), 1u);
    EXPECT_EQ(f[0].record.advisory_id(), "CVE-2022-22815");
    ASSERT_EQ(f[0].also.size(), 1u);
    EXPECT_EQ(f[0].also[0].advisory_id(), "CVE-2022-22816");
}

TEST(Detect, LastBindingWins) {
    const auto cat = base_catalog();
    EXPECT_TRUE(detect("import pandas as x\nimport numpy as x\nx.read_pickle(p)\n", cat).empty());
    EXPECT_EQ(detect("import numpy as x\nimport pandas as x\nx.read_pickle(p)\n", cat).size(), 1u);
    EXPECT_EQ(sites(detect("import pandas as pd\npd.read_pickle(a)\npd = None\npd.read_pickle(b)\n", cat)),
              (Sites{{"pandas.read_pickle", 2}}));
    EXPECT_EQ(sites(detect("import pandas as pd\nq = pd\nq.read_pickle(a)\n", cat)), (Sites{{"pandas.read_pickle", 3}}));
}

TEST(Detect, FunctionScopes) {
    const auto cat = base_catalog();
    // Function bodies resolve against the module as it ends.
    EXPECT_EQ(detect("def load(p):\n    return pd.read_pickle(p)\nimport pandas as pd\n", cat).size(), 1u);
    // Parameters and locals shadow module imports.
    EXPECT_TRUE(detect("import pandas as pd\ndef load(pd):\n    return pd.read_pickle(1)\n", cat).empty());
    EXPECT_TRUE(detect("import pandas as pd\ndef load():\n    x = pd.read_pickle\n    pd = 3\n", cat).empty());
    EXPECT_TRUE(detect("import pandas as pd\nf = lambda pd: pd.read_pickle(1)\n", cat).empty());
    EXPECT_TRUE(detect("import pandas as pd\nr = [pd.read_pickle(1) for pd in range(3)]\n", cat).empty());
    // global makes the module binding visible again.
    EXPECT_EQ(detect("import pandas as pd\ndef f():\n    global pd\n    pd.read_pickle(1)\n", cat).size(), 1u);
    // Imports inside functions.
    EXPECT_EQ(detect("def f():\n    import yaml\n    return yaml.load(s)\n", cat).size(), 1u);
    EXPECT_TRUE(detect("def f():\n    import yaml\n\nyaml.load(s)\n", cat).empty());
}

TEST(Detect, Receivers) {
    const auto cat = base_catalog();
    const auto handler = detect(
        "import tornado.web\n"
        "class MainHandler(tornado.web.RequestHandler):\n"
        "    def get(self):\n"
        "        self.set_header('X-Frame', 'deny')\n"
        "    @staticmethod\n"
        "    def helper(self):\n"
        "        self.set_header('a', 'b')\n",
        cat);
    ASSERT_EQ(sites(handler), (Sites{{"tornado.web.RequestHandler.set_header", 4}}));
    EXPECT_NE(handler[0].resolution_chain.find("MainHandler"), std::string::npos);

    EXPECT_EQ(sites(detect("from tornado.web import RequestHandler\nclass A(RequestHandler):\n    pass\n"
                           "class B(A):\n    def get(me):\n        me.set_header('k', 'v')\n",
                           cat)),
              (Sites{{"tornado.web.RequestHandler.set_header", 6}}));
    EXPECT_EQ(sites(detect("import tornado.web as w\nh = w.RequestHandler(app, req)\nh.set_header('k', 'v')\n", cat)),
              (Sites{{"tornado.web.RequestHandler.set_header", 3}}));
    EXPECT_EQ(sites(detect("import tornado.web as w\nwith w.RequestHandler(a, r) as h:\n    h.set_header('k', 'v')\n", cat)),
              (Sites{{"tornado.web.RequestHandler.set_header", 3}}));
    // An unrelated receiver stays unresolved.
    EXPECT_TRUE(detect("h = make()\nh.set_header('k', 'v')\n", cat).empty());
}

TEST(Detect, StarImports) {
    const auto cat = base_catalog();
    const auto f = detect("from yaml import *\ncfg = load(stream)\n", cat);
    ASSERT_EQ(sites(f), (Sites{{"yaml.load", 2}}));
    EXPECT_NE(f[0].resolution_chain.find("from yaml import *"), std::string::npos);
    // Bound names are not re-resolved through the star import.
    EXPECT_TRUE(detect("from yaml import *\ndef load(s):\n    return s\ncfg = load(stream)\n", cat).empty());
    EXPECT_TRUE(detect("from yaml import *\nx = load\n", cat).empty());
    EXPECT_TRUE(detect("from os import *\ncfg = load(stream)\n", cat).empty());
}

TEST(Detect, RelativeImportsShadow) {
    EXPECT_TRUE(detect("import pandas as pd\nfrom . import pd\npd.read_pickle(1)\n", base_catalog()).empty());
}

TEST(Detect, UserVersionsFilterPatchedOnly) {
    const auto cat = base_catalog();
    const std::string code = "import pandas as pd\nimport networkx as nx\npd.read_pickle(p)\nnx.to_numpy_matrix(G)\n";
    EXPECT_EQ(detect(code, cat).size(), 2u);
    const UserVersions safe{{PackageId::pypi("pandas"), Version::parse("1.0.4")},
                            {PackageId::pypi("networkx"), Version::parse("3.0")}};
    EXPECT_EQ(sites(detect(code, cat, safe)), (Sites{{"networkx.to_numpy_matrix", 4}}));
    const UserVersions affected{{PackageId::pypi("pandas"), Version::parse("1.0.3")}};
    EXPECT_EQ(detect(code, cat, affected).size(), 2u);
}

TEST(Detect, FindingsInSourceOrder) {
    const auto f = detect("import pandas as pd\nimport yaml\ndef later():\n    yaml.load(s)\npd.read_pickle(p)\n",
                          base_catalog());
    EXPECT_EQ(sites(f), (Sites{{"yaml.load", 4}, {"pandas.read_pickle", 5}}));
}

// ----------------------------------------------------- generated snippets

namespace {

struct Api {
    std::string module;
    std::string name;
};

const std::vector<Api> kApis = {
    {"pandas", "read_pickle"}, {"yaml", "load"}, {"numpy", "pad"}, {"tensorflow.math", "segment_sum"},
    {"hashlib", "md5"},        {"networkx", "to_numpy_matrix"},
};

struct Generated {
    std::string code;
    Sites expected;
};

// Builds a snippet from planted uses whose findings are known by construction.
Generated generate_snippet(unsigned seed, unsigned alias_seed) {
    std::mt19937 rng(seed);
    std::mt19937 alias_rng(alias_seed);
    auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<unsigned>(n)); };
    auto alias = [&] {
        std::string s = "m_";
        for (int i = 0; i < 5; ++i) s += static_cast<char>('a' + alias_rng() % 26);
        return s;
    };

    struct Use {
        std::string callee;     // expression text that names the API
        bool dotted;            // attribute chain (counts even without a call)
        std::string root;       // leading local name
        std::string path;
    };
    std::vector<std::string> imports;
    std::vector<Use> uses;
    std::vector<int> order(kApis.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const int n_apis = 1 + pick(4);
    for (int k = 0; k < n_apis; ++k) {
        const Api& api = kApis[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
        const std::string path = api.module + "." + api.name;
        const auto dot = api.module.rfind('.');
        switch (pick(dot == std::string::npos ? 4 : 5)) {
            case 0: {
                const auto a = alias();
                imports.push_back("import " + api.module + " as " + a);
                uses.push_back({a + "." + api.name, true, a, path});
                break;
            }
            case 1:
                imports.push_back("import " + api.module);
                uses.push_back({api.module + "." + api.name, true, api.module.substr(0, api.module.find('.')), path});
                break;
            case 2:
                imports.push_back("from " + api.module + " import " + api.name);
                uses.push_back({api.name, false, api.name, path});
                break;
            case 3: {
                const auto a = alias();
                imports.push_back("from " + api.module + " import " + api.name + " as " + a);
                uses.push_back({a, false, a, path});
                break;
            }
            default: {
                const auto leaf = api.module.substr(dot + 1);
                imports.push_back("from " + api.module.substr(0, dot) + " import " + leaf);
                uses.push_back({leaf + "." + api.name, true, leaf, path});
                break;
            }
        }
    }
    std::shuffle(imports.begin(), imports.end(), rng);

    Generated g;
    std::vector<std::string> lines = {"\"\"\"Generated sample.\"\"\""};
    for (auto& i : imports) lines.push_back(i);
    lines.emplace_back("");
    const int n_lines = 10 + pick(30);
    int fn = 0;
    for (int i = 0; i < n_lines; ++i) {
        const Use& u = uses[static_cast<std::size_t>(pick(static_cast<int>(uses.size())))];
        const int line_no = static_cast<int>(lines.size()) + 1;
        switch (pick(9)) {
            case 0: case 1:
                lines.push_back(fmt::format("r{} = {}(data, {})", i, u.callee, i));
                g.expected.emplace_back(u.path, line_no);
                break;
            case 2:
                lines.push_back(fmt::format("def f{}(x):", fn++));
                lines.push_back(fmt::format("    \"\"\"Calls {}() on x.\"\"\"", u.callee));
                lines.push_back(fmt::format("    return {}(x)", u.callee));
                g.expected.emplace_back(u.path, line_no + 2);
                break;
            case 3:
                lines.push_back(fmt::format("msg{} = \"{}() is insecure, {}(x) too\"", i, u.callee, u.path));
                break;
            case 4:
                lines.push_back(fmt::format("# {}(payload) would be flagged by a regex", u.callee));
                lines.push_back(fmt::format("print('{}', f\"{{len(msg)}} {}\")", u.path, u.callee));
                break;
            case 5:
                // A parameter with the same name shadows the import.
                lines.push_back(fmt::format("def g{}({}):", fn++, u.root));
                lines.push_back(fmt::format("    return {}(1)", u.callee));
                break;
            case 6:
                lines.push_back(fmt::format("ref{} = {}", i, u.callee));
                if (u.dotted) g.expected.emplace_back(u.path, line_no);
                break;
            case 7:
                lines.push_back(fmt::format("if ready{}:", i));
                lines.push_back(fmt::format("    out.append([{}(v) for v in items])", u.callee));
                g.expected.emplace_back(u.path, line_no + 1);
                break;
            default:
                lines.push_back(fmt::format("total = sum(len(str(v)) for v in range({}))", i));
                break;
        }
    }
    for (const auto& l : lines) g.code += l + "\n";
    return g;
}

ApiCatalog generated_catalog() {
    std::vector<OutdatedApiRecord> records;
    int n = 0;
    for (const auto& a : kApis) records.push_back(patched(a.module + "." + a.name, a.module, fmt::format("GEN-{}", n++)));
    return ApiCatalog(std::move(records));
}

}  // namespace

TEST(Generated, FindingsMatchPlantedUses) {
    const auto cat = generated_catalog();
    for (unsigned seed = 1; seed <= 300; ++seed) {
        const auto g = generate_snippet(seed, seed * 7919u);
        SCOPED_TRACE(g.code);
        EXPECT_EQ(sites(detect(g.code, cat)), g.expected);
    }
}

TEST(Generated, InvariantUnderAliasRenaming) {
    const auto cat = generated_catalog();
    for (unsigned seed = 1; seed <= 100; ++seed) {
        const auto a = generate_snippet(seed, 1);
        const auto b = generate_snippet(seed, 2);
        EXPECT_EQ(sites(detect(a.code, cat)), sites(detect(b.code, cat))) << a.code << "\n----\n" << b.code;
    }
}

TEST(Generated, StringOnlyMentionsNeverMatch) {
    // Keep only the literal/comment noise of each snippet: no findings may remain.
    const auto cat = generated_catalog();
    for (unsigned seed = 1; seed <= 100; ++seed) {
        const auto g = generate_snippet(seed, seed);
        std::string noise;
        std::istringstream in(g.code);
        for (std::string line; std::getline(in, line);) {
            if (line.rfind("import", 0) == 0 || line.rfind("from", 0) == 0 || line.rfind("msg", 0) == 0 ||
                line.rfind("#", 0) == 0 || line.rfind("print('", 0) == 0) {
                noise += line + "\n";
            }
        }
        EXPECT_TRUE(detect(noise, cat).empty()) << noise;
    }
}

// ------------------------------------------------------------------ sanitize

TEST(Sanitize, CleanSnippet) {
    const auto r = sanitize("```python\nimport os\nprint(os.getcwd())\n```", base_catalog());
    EXPECT_EQ(r.extraction, StageStatus::ok);
    EXPECT_EQ(r.parse, StageStatus::ok);
    EXPECT_TRUE(r.ban_list.empty());
    EXPECT_TRUE(r.clean());
    EXPECT_EQ(exit_status(r), 0);
}

TEST(Sanitize, BanListFirstOccurrenceOrder) {
    const auto r = sanitize(
        "```\nimport yaml\nimport pandas as pd\na = yaml.load(s)\nb = pd.read_pickle(p)\nc = yaml.load(t)\n```",
        base_catalog());
    ASSERT_EQ(r.findings.size(), 3u);
    EXPECT_EQ(r.ban_list, (std::vector<ApiPath>{ApiPath::parse("yaml.load"), ApiPath::parse("pandas.read_pickle")}));
    EXPECT_EQ(exit_status(r), 1);
}

TEST(Sanitize, FailuresAreReported) {
    const auto cat = base_catalog();
    const auto no_fence = sanitize("import yaml\nyaml.load(s)\n", cat);
    EXPECT_EQ(no_fence.extraction, StageStatus::failed);
    EXPECT_EQ(no_fence.parse, StageStatus::failed);
    EXPECT_TRUE(no_fence.findings.empty());
    EXPECT_EQ(exit_status(no_fence), 2);

    const auto broken = sanitize("```\ndef f(:\n```", cat);
    EXPECT_EQ(broken.extraction, StageStatus::ok);
    EXPECT_EQ(broken.parse, StageStatus::failed);
    ASSERT_TRUE(broken.parse_error);
    EXPECT_EQ(exit_status(broken), 2);
}

TEST(Sanitize, SourceModes) {
    const auto cat = base_catalog();
    SanitizeOptions opts;
    opts.mode = InputMode::automatic;
    const auto src = sanitize("import yaml\nyaml.load(s)\n", cat, opts);
    EXPECT_EQ(src.extraction, StageStatus::skipped);
    EXPECT_EQ(src.findings.size(), 1u);
    EXPECT_EQ(sanitize("text\n```\nimport yaml\nyaml.load(s)\n```\n", cat, opts).extraction, StageStatus::ok);
}

TEST(Sanitize, JsonReport) {
    const auto r = sanitize("```python\nimport pandas as pd\ndata = pd.read_pickle(path)\n```", base_catalog());
    const auto doc = nlohmann::json::parse(report_to_json(r));
    EXPECT_EQ(doc["extraction"], "ok");
    EXPECT_EQ(doc["parse"], "ok");
    ASSERT_EQ(doc["findings"].size(), 1u);
    EXPECT_EQ(doc["findings"][0]["api"], "pandas.read_pickle");
    EXPECT_EQ(doc["findings"][0]["kind"], "patched");
    EXPECT_EQ(doc["findings"][0]["advisory"], "CVE-2020-13901");
    EXPECT_EQ(doc["findings"][0]["line"], 2);
    EXPECT_EQ(doc["findings"][0]["col"], 8);
    EXPECT_EQ(doc["ban_list"], nlohmann::json::array({"pandas.read_pickle"}));
    EXPECT_TRUE(doc["timings_ms"].contains("detect"));
    const auto table = report_to_table(r);
    EXPECT_NE(table.find("2:8"), std::string::npos);
    EXPECT_NE(table.find("pandas.read_pickle"), std::string::npos);
}

TEST(Sanitize, BatchMatchesSerial) {
    const auto cat = generated_catalog();
    std::vector<std::string> texts;
    for (unsigned seed = 1; seed <= 60; ++seed) {
        texts.push_back(seed % 7 == 0 ? "no fence" : "```\n" + generate_snippet(seed, seed).code + "```\n");
    }
    const auto a = sanitize_batch(texts, cat, {}, false);
    const auto b = sanitize_batch(texts, cat, {}, true);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].findings, b[i].findings);
        EXPECT_EQ(a[i].extraction, b[i].extraction);
    }
}
