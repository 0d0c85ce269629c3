#pragma once

#include "apilot/catalog/catalog.hpp"
#include "apilot/pyparse/ast.hpp"

#include <map>
#include <string>
#include <vector>

namespace apilot::sanitizer {

enum class BindingForm { module_import, aliased_module, from_import, aliased_from, star_import };

std::string_view to_string(BindingForm form);

struct ImportBinding {
    std::string local_name;  // "*" for star imports
    catalog::ApiPath target;
    BindingForm form = BindingForm::module_import;
    pyparse::Position where;

    friend bool operator==(const ImportBinding&, const ImportBinding&) = default;
};

/// Every absolute import in the module, any scope, in document order.
/// `import a.b` binds `a` to `a`; relative imports are skipped because a
/// lone snippet has no package to resolve them against.
std::vector<ImportBinding> resolve_bindings(const pyparse::Module& module);

struct Finding {
    catalog::ApiPath api_path;
    catalog::OutdatedApiRecord record;
    /// Other records for the same path at this site (e.g. a second advisory).
    std::vector<catalog::OutdatedApiRecord> also;
    pyparse::Span site;
    std::string resolution_chain;
    std::string reason;

    friend bool operator==(const Finding&, const Finding&) = default;
};

using UserVersions = std::map<catalog::PackageId, catalog::Version>;

/// Finds cataloged APIs used in the module.
///
/// Checked sites are call expressions and maximal attribute chains rooted at
/// a name. The leading name is resolved through the import bindings visible
/// at that point (last binding wins, function bodies see their enclosing
/// scope as it stands at the end). Two receiver forms are also followed:
/// a name assigned from a call to a resolved class (`x = mod.Cls()`, or a
/// `with ... as x`) and the first parameter of a method whose class derives
/// from a resolved base. Under `from M import *` a bare call to an unbound
/// name N is reported when M.N is cataloged.
///
/// Names that are parameters or local assignments shadow imports. Strings,
/// comments and bare identifier mentions never produce findings. With a
/// user version for a package, patched records outside its affected ranges
/// are dropped. One finding per site, ordered by position.
std::vector<Finding> detect_outdated(const pyparse::Module& module, const std::vector<ImportBinding>& bindings,
                                     const catalog::ApiCatalog& catalog, const UserVersions& user_versions = {});

/// One-line explanation of a record, used as Finding::reason.
std::string describe_record(const catalog::OutdatedApiRecord& record);

/// "[0, 1.0.4)" style list of ranges.
std::string describe_ranges(const std::vector<catalog::VersionRange>& ranges);

}  // namespace apilot::sanitizer
