#include "apilot/miner/snapshot.hpp"
#include "apilot/pyparse/unparse.hpp"
#include "apilot/pyparse/walk.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>

namespace apilot::miner {

using pyparse::Expr;
using pyparse::ExprKind;
using pyparse::Stmt;
using pyparse::StmtKind;
using pyparse::StmtPtr;

namespace {

bool is_definition(const Stmt& s) { return s.kind == StmtKind::FunctionDef || s.kind == StmtKind::ClassDef; }

std::vector<SnapshotParam> params_of(const pyparse::Arguments* args, bool drop_first) {
    std::vector<SnapshotParam> out;
    if (!args) return out;
    bool star_seen = false;
    bool slash_pending = false;
    bool dropped = !drop_first;
    for (const auto& p : args->params) {
        if (!dropped && (p.kind == pyparse::ParamKind::positional_only ||
                         p.kind == pyparse::ParamKind::positional_or_keyword)) {
            dropped = true;
            continue;
        }
        if (slash_pending && p.kind != pyparse::ParamKind::positional_only) {
            out.push_back({"/", false});
            slash_pending = false;
        }
        switch (p.kind) {
            case pyparse::ParamKind::positional_only:
                slash_pending = true;
                out.push_back({p.name, p.default_value != nullptr});
                break;
            case pyparse::ParamKind::positional_or_keyword:
                out.push_back({p.name, p.default_value != nullptr});
                break;
            case pyparse::ParamKind::var_positional:
                star_seen = true;
                out.push_back({"*" + p.name, false});
                break;
            case pyparse::ParamKind::keyword_only:
                if (!star_seen) {
                    out.push_back({"*", false});
                    star_seen = true;
                }
                out.push_back({p.name, p.default_value != nullptr});
                break;
            case pyparse::ParamKind::var_keyword:
                out.push_back({"**" + p.name, false});
                break;
        }
    }
    if (slash_pending) out.push_back({"/", false});
    return out;
}

// Visits statements of a body, descending into compound statements but not
// into nested function or class definitions.
template <class F>
void own_statements(const std::vector<StmtPtr>& body, F&& fn) {
    for (const auto& s : body) {
        if (is_definition(*s)) continue;
        fn(*s);
        pyparse::for_each_child_body(*s, [&](const std::vector<StmtPtr>& inner) { own_statements(inner, fn); });
    }
}

std::string terminal_name(const Expr& e) {
    if (e.kind == ExprKind::Name || e.kind == ExprKind::Attribute) return e.text;
    return {};
}

bool names_deprecation_category(const Expr& arg) {
    const Expr* e = &arg;
    if (e->kind == ExprKind::Call) e = e->items[0].get();
    return terminal_name(*e).find("Deprecat") != std::string::npos;
}

bool is_deprecation_warning_call(const Expr& call) {
    const std::string callee = terminal_name(*call.items[0]);
    if (callee != "warn" && callee != "warn_explicit") return false;
    for (std::size_t i = 1; i < call.items.size(); ++i) {
        const Expr& arg = *call.items[i];
        if (arg.kind == ExprKind::Keyword) {
            if (arg.text == "category" && names_deprecation_category(*arg.items[0])) return true;
        } else if (arg.kind != ExprKind::Starred && arg.kind != ExprKind::DoubleStarred &&
                   names_deprecation_category(arg)) {
            return true;
        }
    }
    return false;
}

bool decorator_deprecates(const Expr& decorator) {
    const Expr& target = decorator.kind == ExprKind::Call ? *decorator.items[0] : decorator;
    auto dotted = pyparse::dotted_name(target);
    if (!dotted) return false;
    std::string lower = *dotted;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return lower.find("deprecat") != std::string::npos;
}

bool body_warns(const std::vector<StmtPtr>& body) {
    bool found = false;
    own_statements(body, [&](const Stmt& s) {
        if (found) return;
        pyparse::for_each_stmt_expr(s, [&](const Expr& root) {
            pyparse::walk_exprs(root, [&](const Expr& e) {
                if (!found && e.kind == ExprKind::Call && is_deprecation_warning_call(e)) found = true;
            });
        });
    });
    return found;
}

const Stmt* find_init(const Stmt& cls) {
    const Stmt* init = nullptr;
    for (const auto& s : cls.body) {
        if (s->kind == StmtKind::FunctionDef && s->name == "__init__") init = s.get();
    }
    return init;
}

class Collector {
public:
    std::vector<FunctionSnapshot> out;

    void visit(const std::vector<StmtPtr>& body, const std::string& prefix) {
        for (const auto& s : body) {
            if (s->kind == StmtKind::FunctionDef) {
                const std::string qual = prefix + s->name;
                add(function_snapshot(*s, qual));
                visit(s->body, qual + ".<locals>.");
            } else if (s->kind == StmtKind::ClassDef) {
                const std::string qual = prefix + s->name;
                add(class_snapshot(*s, qual));
                visit(s->body, qual + ".");
            } else {
                pyparse::for_each_child_body(*s, [&](const std::vector<StmtPtr>& inner) { visit(inner, prefix); });
            }
        }
    }

private:
    std::unordered_map<std::string, std::size_t> index_;

    // A later definition of the same name replaces the earlier one.
    void add(FunctionSnapshot snap) {
        auto [it, inserted] = index_.emplace(snap.qualified_name, out.size());
        if (inserted) {
            out.push_back(std::move(snap));
        } else {
            out[it->second] = std::move(snap);
        }
    }

    static FunctionSnapshot function_snapshot(const Stmt& def, const std::string& qual) {
        FunctionSnapshot snap;
        snap.qualified_name = qual;
        snap.params = params_of(def.args.get(), false);
        own_statements(def.body, [&](const Stmt& s) {
            if (s.kind == StmtKind::Return) snap.return_exprs.push_back(s.value ? pyparse::canonical(*s.value) : "");
        });
        snap.has_deprecation_warning = detect_deprecation(def);
        snap.first_line = def.span.begin.line;
        snap.last_line = def.span.end.line;
        return snap;
    }

    static FunctionSnapshot class_snapshot(const Stmt& cls, const std::string& qual) {
        FunctionSnapshot snap;
        snap.qualified_name = qual;
        snap.is_class = true;
        const Stmt* init = find_init(cls);
        if (init) snap.params = params_of(init->args.get(), true);
        snap.has_deprecation_warning = detect_deprecation(cls) || (init && body_warns(init->body));
        snap.first_line = cls.span.begin.line;
        snap.last_line = cls.span.end.line;
        return snap;
    }
};

std::optional<std::vector<std::string>> literal_strings(const Expr& e) {
    if (e.kind != ExprKind::List && e.kind != ExprKind::Tuple) return std::nullopt;
    std::vector<std::string> out;
    for (const auto& item : e.items) {
        auto s = pyparse::string_value(*item);
        if (!s) return std::nullopt;
        out.push_back(std::move(*s));
    }
    return out;
}

bool is_all_name(const Expr& e) { return e.kind == ExprKind::Name && e.text == "__all__"; }

}  // namespace

bool detect_deprecation(const Stmt& definition) {
    for (const auto& d : definition.decorators) {
        if (decorator_deprecates(*d)) return true;
    }
    return definition.kind == StmtKind::FunctionDef && body_warns(definition.body);
}

std::optional<std::vector<std::string>> module_exports(const pyparse::Module& module) {
    std::optional<std::vector<std::string>> names;
    for (const auto& s : module.body) {
        const bool assigns = (s->kind == StmtKind::Assign || s->kind == StmtKind::AnnAssign) &&
                             std::any_of(s->targets.begin(), s->targets.end(),
                                         [](const auto& t) { return is_all_name(*t); });
        if (assigns) {
            if (!s->value) continue;
            auto lit = literal_strings(*s->value);
            if (!lit) return std::nullopt;
            names = std::move(lit);
        } else if (s->kind == StmtKind::AugAssign && is_all_name(*s->targets[0])) {
            auto lit = literal_strings(*s->value);
            if (!lit || !names || s->name != "+") return std::nullopt;
            names->insert(names->end(), lit->begin(), lit->end());
        } else if (s->kind == StmtKind::Expr && s->value->kind == ExprKind::Call &&
                   s->value->items[0]->kind == ExprKind::Attribute && is_all_name(*s->value->items[0]->items[0])) {
            const Expr& call = *s->value;
            const std::string& method = call.items[0]->text;
            if (!names || call.items.size() != 2) return std::nullopt;
            if (method == "append") {
                auto v = pyparse::string_value(*call.items[1]);
                if (!v) return std::nullopt;
                names->push_back(std::move(*v));
            } else if (method == "extend") {
                auto lit = literal_strings(*call.items[1]);
                if (!lit) return std::nullopt;
                names->insert(names->end(), lit->begin(), lit->end());
            } else {
                return std::nullopt;
            }
        }
    }
    return names;
}

std::variant<FileSnapshot, pyparse::ParseFailure> snapshot_file(std::string_view source) {
    auto parsed = pyparse::try_parse_module(source);
    if (auto* failure = std::get_if<pyparse::ParseFailure>(&parsed)) return *failure;
    const auto& module = std::get<pyparse::Module>(parsed);
    Collector c;
    c.visit(module.body, "");
    return FileSnapshot{std::move(c.out), module_exports(module)};
}

std::variant<std::vector<FunctionSnapshot>, pyparse::ParseFailure> snapshot_functions(std::string_view source,
                                                                                     std::string_view) {
    auto snap = snapshot_file(source);
    if (auto* failure = std::get_if<pyparse::ParseFailure>(&snap)) return *failure;
    return std::move(std::get<FileSnapshot>(snap).functions);
}

std::string render_signature(const FunctionSnapshot& snapshot) {
    const auto dot = snapshot.qualified_name.rfind('.');
    std::string out = dot == std::string::npos ? snapshot.qualified_name : snapshot.qualified_name.substr(dot + 1);
    out += '(';
    for (std::size_t i = 0; i < snapshot.params.size(); ++i) {
        if (i > 0) out += ", ";
        out += snapshot.params[i].name;
        if (snapshot.params[i].has_default) out += "=…";
    }
    out += ')';
    return out;
}

}  // namespace apilot::miner
