#include "apilot/sanitizer/detect.hpp"

#include "apilot/pyparse/walk.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <deque>
#include <unordered_map>
#include <unordered_set>

namespace apilot::sanitizer {

using catalog::ApiPath;
using catalog::OutdatedApiRecord;
using pyparse::Expr;
using pyparse::ExprKind;
using pyparse::Position;
using pyparse::Stmt;
using pyparse::StmtKind;

std::string_view to_string(BindingForm form) {
    switch (form) {
        case BindingForm::module_import: return "module_import";
        case BindingForm::aliased_module: return "aliased_module";
        case BindingForm::from_import: return "from_import";
        case BindingForm::aliased_from: return "aliased_from";
        case BindingForm::star_import: return "star_import";
    }
    return "?";
}

namespace {

void collect_bindings(const std::vector<pyparse::StmtPtr>& body, std::vector<ImportBinding>& out) {
    for (const auto& s : body) {
        if (s->kind == StmtKind::Import) {
            for (const auto& a : s->names) {
                if (a.asname) {
                    out.push_back({*a.asname, ApiPath::parse(a.name), BindingForm::aliased_module, a.span.begin});
                } else {
                    const auto root = a.name.substr(0, a.name.find('.'));
                    out.push_back({root, ApiPath::parse(root), BindingForm::module_import, a.span.begin});
                }
            }
        } else if (s->kind == StmtKind::ImportFrom && s->level == 0) {
            const auto module = ApiPath::parse(s->module);
            for (const auto& a : s->names) {
                if (a.name == "*") {
                    out.push_back({"*", module, BindingForm::star_import, a.span.begin});
                } else {
                    out.push_back({a.asname.value_or(a.name), module.child(a.name),
                                   a.asname ? BindingForm::aliased_from : BindingForm::from_import, a.span.begin});
                }
            }
        }
        pyparse::for_each_child_body(*s, [&](const auto& child) { collect_bindings(child, out); });
    }
}

std::string join_rest(const std::vector<std::string_view>& parts, std::size_t from) {
    std::string out;
    for (std::size_t i = from; i < parts.size(); ++i) {
        out += '.';
        out += parts[i];
    }
    return out;
}

std::vector<std::string_view> split_dotted(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto dot = s.find('.', start);
        out.push_back(s.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
        if (dot == std::string_view::npos) return out;
        start = dot + 1;
    }
}

struct Binding {
    enum class Kind { import, instance, klass, shadowed } kind = Kind::shadowed;
    std::string target;                // import: dotted target
    std::vector<std::string> classes;  // instance / klass: resolved class paths
    std::string note;
};

struct Scope {
    Scope* parent = nullptr;
    bool function = false;
    bool klass = false;
    std::unordered_map<std::string, Binding> names;
    std::unordered_set<std::string> locals;
    std::vector<std::pair<std::string, int>> stars;  // module, line
};

enum class Lookup { found, shadowed, unknown };

int kind_rank(const OutdatedApiRecord& r) {
    switch (r.kind()) {
        case catalog::ApiKind::patched: return 0;
        case catalog::ApiKind::deprecated: return 1;
        case catalog::ApiKind::usage_modified: return 2;
    }
    return 3;
}

void add_target_names(const Expr& e, std::unordered_set<std::string>& out) {
    switch (e.kind) {
        case ExprKind::Name: out.insert(e.text); break;
        case ExprKind::Tuple:
        case ExprKind::List:
        case ExprKind::Starred:
            for (const auto& i : e.items) {
                if (i) add_target_names(*i, out);
            }
            break;
        default: break;
    }
}

// Names a function body binds anywhere (its locals), nested scopes excluded.
void collect_locals(const std::vector<pyparse::StmtPtr>& body, std::unordered_set<std::string>& out,
                    std::unordered_set<std::string>& declared_global) {
    for (const auto& s : body) {
        switch (s->kind) {
            case StmtKind::FunctionDef:
            case StmtKind::ClassDef: out.insert(s->name); continue;
            case StmtKind::Import:
            case StmtKind::ImportFrom:
                for (const auto& a : s->names) {
                    if (a.name != "*") out.insert(a.asname.value_or(a.name.substr(0, a.name.find('.'))));
                }
                break;
            case StmtKind::Global:
            case StmtKind::Nonlocal:
                for (const auto& n : s->identifiers) declared_global.insert(n);
                break;
            case StmtKind::Assign:
            case StmtKind::AugAssign:
            case StmtKind::AnnAssign:
            case StmtKind::For:
            case StmtKind::Delete:
                for (const auto& t : s->targets) add_target_names(*t, out);
                break;
            case StmtKind::With:
                for (const auto& w : s->items) {
                    if (w.target) add_target_names(*w.target, out);
                }
                break;
            default: break;
        }
        for (const auto& h : s->handlers) {
            if (h.name) out.insert(*h.name);
        }
        pyparse::for_each_child_body(*s, [&](const auto& child) { collect_locals(child, out, declared_global); });
    }
}

class Detector {
public:
    Detector(const std::vector<ImportBinding>& bindings, const catalog::ApiCatalog& catalog,
             const UserVersions& versions)
        : catalog_(catalog), versions_(versions) {
        for (const auto& b : bindings) by_position_[b.where].push_back(&b);
    }

    std::vector<Finding> run(const pyparse::Module& module) {
        Scope& top = scopes_.emplace_back();
        process_body(module.body, top, nullptr);
        while (!deferred_.empty()) {
            auto job = deferred_.front();
            deferred_.pop_front();
            run_function(job);
        }
        std::stable_sort(findings_.begin(), findings_.end(), [](const Finding& a, const Finding& b) {
            return a.site.begin < b.site.begin;
        });
        return std::move(findings_);
    }

private:
    struct ClassContext {
        std::vector<std::string> bases;
        std::string name;
        int line = 0;
    };

    struct Deferred {
        const Stmt* def;
        Scope* enclosing;
        std::optional<ClassContext> owner;
    };

    static Scope* lookup_parent(Scope* s) {
        while (s && s->klass) s = s->parent;
        return s;
    }

    Scope& child_scope(Scope& parent, bool function) {
        Scope& s = scopes_.emplace_back();
        s.parent = &parent;
        s.function = function;
        return s;
    }

    std::pair<Lookup, const Binding*> lookup(const std::string& name, const Scope* scope) const {
        for (const Scope* s = scope; s; s = s->parent) {
            if (auto it = s->names.find(name); it != s->names.end()) {
                if (it->second.kind == Binding::Kind::shadowed) return {Lookup::shadowed, nullptr};
                return {Lookup::found, &it->second};
            }
            if (s->function && s->locals.contains(name)) return {Lookup::shadowed, nullptr};
        }
        return {Lookup::unknown, nullptr};
    }

    // Dotted import path of a name/attribute chain, if its root is an import.
    std::optional<std::string> import_path(const Expr& e, const Scope& scope) const {
        const auto dotted = pyparse::dotted_name(e);
        if (!dotted) return std::nullopt;
        const auto parts = split_dotted(*dotted);
        auto [state, b] = lookup(std::string(parts[0]), &scope);
        if (state != Lookup::found || b->kind != Binding::Kind::import) return std::nullopt;
        return b->target + join_rest(parts, 1);
    }

    const Binding* class_binding(const Expr& e, const Scope& scope) const {
        if (e.kind != ExprKind::Name) return nullptr;
        auto [state, b] = lookup(e.text, &scope);
        return state == Lookup::found && b->kind == Binding::Kind::klass ? b : nullptr;
    }

    // Binding for `name = value` (or `with value as name`).
    Binding binding_for(const Expr& value, const Scope& scope) const {
        Binding b;
        const int line = value.span.begin.line;
        if (value.kind == ExprKind::Call && value.items[0]) {
            const Expr& callee = *value.items[0];
            if (auto path = import_path(callee, scope)) {
                b.kind = Binding::Kind::instance;
                b.classes = {*path};
                b.note = fmt::format("instance of {} (line {})", *path, line);
            } else if (const Binding* k = class_binding(callee, scope)) {
                b.kind = Binding::Kind::instance;
                b.classes = k->classes;
                b.note = fmt::format("instance of {}, {} (line {})", callee.text, k->note, line);
            }
            return b;
        }
        if (auto path = import_path(value, scope)) {
            b.kind = Binding::Kind::import;
            b.target = *path;
            b.note = fmt::format("bound to {} (line {})", *path, line);
        }
        return b;
    }

    void bind_target(const Expr& target, const Expr* value, Scope& scope) {
        if (target.kind == ExprKind::Name) {
            scope.names[target.text] = value ? binding_for(*value, scope) : Binding{};
            return;
        }
        std::unordered_set<std::string> names;
        add_target_names(target, names);
        for (const auto& n : names) scope.names[n] = Binding{};
    }

    void bind_import(const pyparse::Alias& alias, const std::string& local, Scope& scope) {
        Binding b;
        if (auto it = by_position_.find(alias.span.begin); it != by_position_.end()) {
            for (const ImportBinding* ib : it->second) {
                if (ib->local_name != local) continue;
                b.kind = Binding::Kind::import;
                b.target = ib->target.dotted();
                b.note = fmt::format("{} -> {} ({}, line {})", local, b.target, to_string(ib->form), ib->where.line);
            }
        }
        scope.names[local] = std::move(b);
    }

    void process_body(const std::vector<pyparse::StmtPtr>& body, Scope& scope, const ClassContext* owner) {
        for (const auto& s : body) process_stmt(*s, scope, owner);
    }

    void visit_all(const std::vector<pyparse::ExprPtr>& v, Scope& scope) {
        for (const auto& e : v) {
            if (e) visit(*e, scope);
        }
    }

    void visit_signature(const Stmt& s, Scope& scope) {
        visit_all(s.decorators, scope);
        if (s.args) {
            for (const auto& p : s.args->params) {
                if (p.annotation) visit(*p.annotation, scope);
                if (p.default_value) visit(*p.default_value, scope);
            }
        }
        if (s.returns) visit(*s.returns, scope);
    }

    void process_stmt(const Stmt& s, Scope& scope, const ClassContext* owner) {
        switch (s.kind) {
            case StmtKind::Import:
                for (const auto& a : s.names) bind_import(a, a.asname.value_or(a.name.substr(0, a.name.find('.'))), scope);
                return;
            case StmtKind::ImportFrom:
                for (const auto& a : s.names) {
                    if (a.name != "*") {
                        bind_import(a, a.asname.value_or(a.name), scope);
                        continue;
                    }
                    if (auto it = by_position_.find(a.span.begin); it != by_position_.end()) {
                        for (const ImportBinding* ib : it->second) {
                            if (ib->form == BindingForm::star_import) scope.stars.emplace_back(ib->target.dotted(), ib->where.line);
                        }
                    }
                }
                return;
            case StmtKind::FunctionDef: {
                visit_signature(s, scope);
                scope.names[s.name] = Binding{};
                std::optional<ClassContext> ctx;
                if (owner) ctx = *owner;
                deferred_.push_back({&s, lookup_parent(&scope), std::move(ctx)});
                return;
            }
            case StmtKind::ClassDef: {
                visit_all(s.decorators, scope);
                visit_all(s.bases, scope);
                ClassContext ctx{{}, s.name, s.span.begin.line};
                std::vector<std::string> notes;
                for (const auto& base : s.bases) {
                    if (!base || base->kind == ExprKind::Keyword) continue;
                    if (auto path = import_path(*base, scope)) {
                        ctx.bases.push_back(*path);
                        notes.push_back(*path);
                    } else if (const Binding* k = class_binding(*base, scope)) {
                        ctx.bases.insert(ctx.bases.end(), k->classes.begin(), k->classes.end());
                        notes.push_back(fmt::format("{} ({})", base->text, k->note));
                    }
                }
                Scope& body = child_scope(scope, false);
                body.klass = true;
                process_body(s.body, body, &ctx);
                Binding b;
                if (!ctx.bases.empty()) {
                    b.kind = Binding::Kind::klass;
                    b.classes = ctx.bases;
                    b.note = fmt::format("{} derives from {} (line {})", s.name, fmt::join(notes, ", "), ctx.line);
                }
                scope.names[s.name] = std::move(b);
                return;
            }
            case StmtKind::Assign:
                visit(*s.value, scope);
                visit_all(s.targets, scope);
                for (const auto& t : s.targets) bind_target(*t, s.value.get(), scope);
                return;
            case StmtKind::AnnAssign:
                if (s.annotation) visit(*s.annotation, scope);
                if (s.value) visit(*s.value, scope);
                visit(*s.targets[0], scope);
                if (s.value) bind_target(*s.targets[0], s.value.get(), scope);
                return;
            case StmtKind::AugAssign:
            case StmtKind::Delete:
                if (s.value) visit(*s.value, scope);
                visit_all(s.targets, scope);
                for (const auto& t : s.targets) bind_target(*t, nullptr, scope);
                return;
            case StmtKind::For:
                visit(*s.value, scope);
                visit_all(s.targets, scope);
                for (const auto& t : s.targets) bind_target(*t, nullptr, scope);
                process_body(s.body, scope, owner);
                process_body(s.orelse, scope, owner);
                return;
            case StmtKind::With:
                for (const auto& w : s.items) {
                    visit(*w.context, scope);
                    if (w.target) {
                        visit(*w.target, scope);
                        bind_target(*w.target, w.context.get(), scope);
                    }
                }
                process_body(s.body, scope, owner);
                return;
            case StmtKind::Try:
                process_body(s.body, scope, owner);
                for (const auto& h : s.handlers) {
                    if (h.type) visit(*h.type, scope);
                    if (h.name) scope.names[*h.name] = Binding{};
                    process_body(h.body, scope, owner);
                }
                process_body(s.orelse, scope, owner);
                process_body(s.finalbody, scope, owner);
                return;
            default:
                pyparse::for_each_stmt_expr(s, [&](const Expr& e) { visit(e, scope); });
                pyparse::for_each_child_body(s, [&](const auto& child) { process_body(child, scope, owner); });
                return;
        }
    }

    void run_function(const Deferred& job) {
        const Stmt& def = *job.def;
        Scope& scope = child_scope(*job.enclosing, true);
        std::unordered_set<std::string> declared;
        collect_locals(def.body, scope.locals, declared);
        for (const auto& p : def.args->params) scope.locals.insert(p.name);
        for (const auto& n : declared) scope.locals.erase(n);

        if (job.owner && !job.owner->bases.empty() && !def.args->params.empty()) {
            const auto& first = def.args->params.front();
            const bool positional = first.kind == pyparse::ParamKind::positional_only ||
                                    first.kind == pyparse::ParamKind::positional_or_keyword;
            const bool is_static = std::any_of(def.decorators.begin(), def.decorators.end(), [](const auto& d) {
                return d->kind == ExprKind::Name && d->text == "staticmethod";
            });
            if (positional && !is_static) {
                Binding b;
                b.kind = Binding::Kind::instance;
                b.classes = job.owner->bases;
                b.note = fmt::format("{} is {} of {}, derived from {} (line {})", first.name,
                                     first.name == "cls" ? "the class" : "an instance", job.owner->name,
                                     fmt::join(job.owner->bases, ", "), job.owner->line);
                scope.names[first.name] = std::move(b);
            }
        }
        process_body(def.body, scope, nullptr);
    }

    void visit(const Expr& e, Scope& scope) {
        switch (e.kind) {
            case ExprKind::Attribute:
                if (pyparse::chain_root(e)) {
                    check_chain(e, e.span, false, scope);
                } else if (e.items[0]) {
                    visit(*e.items[0], scope);
                }
                return;
            case ExprKind::Call: {
                const Expr& callee = *e.items[0];
                if (callee.kind == ExprKind::Name || pyparse::chain_root(callee)) {
                    check_chain(callee, e.span, true, scope);
                } else {
                    visit(callee, scope);
                }
                for (std::size_t i = 1; i < e.items.size(); ++i) {
                    if (e.items[i]) visit(*e.items[i], scope);
                }
                return;
            }
            case ExprKind::Lambda: {
                for (const auto& p : e.args->params) {
                    if (p.default_value) visit(*p.default_value, scope);
                }
                Scope& inner = child_scope(scope, true);
                for (const auto& p : e.args->params) inner.locals.insert(p.name);
                visit(*e.items[0], inner);
                return;
            }
            case ExprKind::ListComp:
            case ExprKind::SetComp:
            case ExprKind::GeneratorExp:
            case ExprKind::DictComp: {
                Scope& inner = child_scope(scope, true);
                for (const auto& g : e.generators) add_target_names(*g.target, inner.locals);
                pyparse::for_each_subexpr(e, [&](const Expr& c) { visit(c, inner); });
                return;
            }
            case ExprKind::NamedExpr:
                visit(*e.items[1], scope);
                bind_target(*e.items[0], e.items[1].get(), scope);
                return;
            default:
                pyparse::for_each_subexpr(e, [&](const Expr& c) { visit(c, scope); });
                return;
        }
    }

    void check_chain(const Expr& chain, pyparse::Span site, bool is_call, const Scope& scope) {
        const auto dotted = pyparse::dotted_name(chain);
        if (!dotted) return;
        const auto parts = split_dotted(*dotted);
        const std::string root(parts[0]);
        auto [state, b] = lookup(root, &scope);
        if (state == Lookup::found) {
            if (b->kind == Binding::Kind::import) {
                report(b->target + join_rest(parts, 1), site, fmt::format("{}: {}", *dotted, b->note));
                return;
            }
            if (parts.size() < 2) return;
            for (const auto& cls : b->classes) {
                if (report(cls + join_rest(parts, 1), site, fmt::format("{}: {} {}", *dotted, root, b->note))) return;
            }
            return;
        }
        if (state == Lookup::unknown && is_call && parts.size() == 1) {
            for (const Scope* s = &scope; s; s = s->parent) {
                for (auto it = s->stars.rbegin(); it != s->stars.rend(); ++it) {
                    if (!catalog_.has_member(it->first, root)) continue;
                    report(it->first + "." + root, site,
                           fmt::format("{}: assumed to come from `from {} import *` (line {})", root, it->first,
                                       it->second));
                    return;
                }
            }
        }
    }

    bool report(const std::string& path, pyparse::Span site, std::string chain) {
        const auto indices = catalog_.find_by_path(path);
        if (indices.empty()) return false;
        std::vector<OutdatedApiRecord> hits;
        std::vector<catalog::PackageId> packages;
        for (auto i : indices) {
            const auto& pkg = catalog_.at(i).package;
            if (std::find(packages.begin(), packages.end(), pkg) == packages.end()) packages.push_back(pkg);
        }
        const auto api = ApiPath::parse(path);
        for (const auto& pkg : packages) {
            std::optional<catalog::Version> version;
            if (auto it = versions_.find(pkg); it != versions_.end()) version = it->second;
            for (auto& r : catalog::catalog_query(catalog_, pkg, api, version)) hits.push_back(std::move(r));
        }
        if (hits.empty()) return false;
        std::stable_sort(hits.begin(), hits.end(),
                         [](const auto& a, const auto& b) { return kind_rank(a) < kind_rank(b); });
        Finding f;
        f.api_path = api;
        f.record = std::move(hits.front());
        f.also.assign(std::make_move_iterator(hits.begin() + 1), std::make_move_iterator(hits.end()));
        f.site = site;
        f.resolution_chain = std::move(chain);
        f.reason = describe_record(f.record);
        for (const auto& r : f.also) f.reason += "; " + describe_record(r);
        findings_.push_back(std::move(f));
        return true;
    }

    const catalog::ApiCatalog& catalog_;
    const UserVersions& versions_;
    std::map<Position, std::vector<const ImportBinding*>> by_position_;
    std::deque<Scope> scopes_;
    std::deque<Deferred> deferred_;
    std::vector<Finding> findings_;
};

}  // namespace

std::vector<ImportBinding> resolve_bindings(const pyparse::Module& module) {
    std::vector<ImportBinding> out;
    collect_bindings(module.body, out);
    return out;
}

std::vector<Finding> detect_outdated(const pyparse::Module& module, const std::vector<ImportBinding>& bindings,
                                     const catalog::ApiCatalog& catalog, const UserVersions& user_versions) {
    return Detector(bindings, catalog, user_versions).run(module);
}

std::string describe_ranges(const std::vector<catalog::VersionRange>& ranges) {
    std::vector<std::string> parts;
    for (const auto& r : ranges) {
        parts.push_back(r.fixed ? fmt::format("[{}, {})", r.introduced.original_text(), r.fixed->original_text())
                                : fmt::format("[{}, ...)", r.introduced.original_text()));
    }
    return fmt::format("{}", fmt::join(parts, " "));
}

std::string describe_record(const OutdatedApiRecord& record) {
    if (const auto* d = record.deprecated()) {
        if (d->removed_date) {
            return fmt::format("deprecated since {}, removed on {}", d->deprecated_date.to_string(),
                               d->removed_date->to_string());
        }
        return fmt::format("deprecated since {}, not yet removed", d->deprecated_date.to_string());
    }
    if (const auto* p = record.patched()) {
        std::string out = p->advisory_id;
        if (!p->bug_type.empty()) out += ": " + p->bug_type;
        if (p->cvss) out += fmt::format(" (CVSS {})", *p->cvss);
        return out + fmt::format(", {} affected {}", record.package.name(), describe_ranges(p->affected_ranges));
    }
    const auto* u = record.usage_modified();
    switch (u->change) {
        case catalog::UsageChange::removed:
            return fmt::format("removed on {}; old form {}", u->evidence_date.to_string(), u->old_signature);
        case catalog::UsageChange::params_changed:
            return fmt::format("parameters changed on {}: {} -> {}", u->evidence_date.to_string(), u->old_signature,
                               u->new_signature.value_or("?"));
        case catalog::UsageChange::return_changed:
            return fmt::format("return value changed on {}: {}", u->evidence_date.to_string(), u->old_signature);
    }
    return {};
}

}  // namespace apilot::sanitizer
