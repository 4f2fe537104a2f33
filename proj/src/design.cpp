#include "qmig/design.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "qmig/csv.hpp"

namespace qmig {

Term Term::continuous(std::string name) {
    Term t;
    t.kind = TermKind::Continuous;
    t.name = std::move(name);
    return t;
}

Term Term::categorical(std::string name, double baseline) {
    Term t;
    t.kind = TermKind::Categorical;
    t.name = std::move(name);
    t.baseline = baseline;
    return t;
}

Term Term::interaction(std::string a, std::string b) {
    Term t;
    t.kind = TermKind::Interaction;
    t.name = std::move(a);
    t.other = std::move(b);
    return t;
}

Term Term::fixed_effect(std::string name) {
    Term t;
    t.kind = TermKind::FixedEffect;
    t.name = std::move(name);
    return t;
}

DesignMatrix DesignMatrix::select_rows(const std::vector<bool>& keep) const {
    if (keep.size() != n_rows()) {
        throw std::invalid_argument("row selection mask does not match design rows");
    }
    std::size_t kept = 0;
    for (bool k : keep) kept += k ? 1 : 0;
    DesignMatrix out;
    out.X.resize(kept, X.cols());
    out.y.resize(kept);
    out.w.resize(kept);
    out.labels = labels;
    out.dropped_terms = dropped_terms;
    out.has_intercept = has_intercept;
    out.dropped_rows = dropped_rows;
    out.row_index.reserve(kept);
    std::size_t r = 0;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (!keep[i]) continue;
        out.X.row(r) = X.row(i);
        out.y(r) = y(i);
        out.w(r) = w(i);
        out.row_index.push_back(row_index[i]);
        ++r;
    }
    return out;
}

namespace {

std::string level_label(const std::string& name, double level) {
    return name + "=" + csv::format_double(level);
}

std::vector<double> distinct_levels(const std::vector<double>& col,
                                    const std::vector<std::size_t>& rows) {
    std::set<double> levels;
    for (std::size_t r : rows) levels.insert(col[r]);
    return {levels.begin(), levels.end()};
}

} // namespace

DesignMatrix build_design(const DataTable& data, const DesignSpec& spec,
                          bool for_prediction) {
    // Columns whose missingness drops a row.
    std::vector<const std::vector<double>*> required;
    auto require = [&](const std::string& name) {
        required.push_back(&data.column(name)); // throws on unknown variable
    };
    for (const auto& t : spec.terms) {
        require(t.name);
        if (t.kind == TermKind::Interaction) require(t.other);
    }
    if (!spec.weight.empty()) require(spec.weight);

    const std::vector<double>* response = nullptr;
    if (!spec.response.empty() && (!for_prediction || data.has_column(spec.response))) {
        response = &data.column(spec.response);
    } else if (!for_prediction) {
        throw std::invalid_argument("design spec has no response variable");
    }

    DesignMatrix out;
    out.has_intercept = spec.intercept;
    std::vector<std::size_t> rows;
    rows.reserve(data.n_rows());
    for (std::size_t r = 0; r < data.n_rows(); ++r) {
        bool ok = true;
        for (const auto* col : required) {
            if (std::isnan((*col)[r])) {
                ok = false;
                break;
            }
        }
        if (ok && !for_prediction && response && std::isnan((*response)[r])) ok = false;
        if (ok) rows.push_back(r);
        else ++out.dropped_rows;
    }
    if (rows.empty()) {
        throw std::invalid_argument("design has no complete rows");
    }

    // Expand terms to column definitions: each column is a label plus a
    // function of the table row.
    struct ColumnDef {
        std::string label;
        const std::vector<double>* a = nullptr;
        const std::vector<double>* b = nullptr; // interaction partner
        double level = 0.0;                     // indicator level
        bool indicator = false;
        bool constant = false;
    };
    std::vector<ColumnDef> defs;
    if (spec.intercept) {
        ColumnDef c;
        c.label = "const";
        c.constant = true;
        defs.push_back(c);
    }
    for (const auto& t : spec.terms) {
        const auto& col = data.column(t.name);
        switch (t.kind) {
            case TermKind::Continuous: {
                ColumnDef c;
                c.label = t.name;
                c.a = &col;
                defs.push_back(c);
                break;
            }
            case TermKind::Interaction: {
                ColumnDef c;
                c.label = t.name + ":" + t.other;
                c.a = &col;
                c.b = &data.column(t.other);
                defs.push_back(c);
                break;
            }
            case TermKind::Categorical: {
                auto levels = distinct_levels(col, rows);
                if (!std::binary_search(levels.begin(), levels.end(), t.baseline)) {
                    throw std::invalid_argument("baseline level " +
                                                csv::format_double(t.baseline) +
                                                " not present in '" + t.name + "'");
                }
                if (levels.size() < 2) {
                    out.dropped_terms.push_back(t.name);
                    break;
                }
                for (double lv : levels) {
                    if (lv == t.baseline) continue;
                    ColumnDef c;
                    c.label = level_label(t.name, lv);
                    c.a = &col;
                    c.level = lv;
                    c.indicator = true;
                    defs.push_back(c);
                }
                break;
            }
            case TermKind::FixedEffect: {
                auto levels = distinct_levels(col, rows);
                if (levels.size() < 2) {
                    out.dropped_terms.push_back(t.name);
                    break;
                }
                // Smallest level is the reference category.
                for (std::size_t i = 1; i < levels.size(); ++i) {
                    ColumnDef c;
                    c.label = level_label(t.name, levels[i]);
                    c.a = &col;
                    c.level = levels[i];
                    c.indicator = true;
                    defs.push_back(c);
                }
                break;
            }
        }
    }

    {
        std::set<std::string> seen;
        for (const auto& d : defs) {
            if (!seen.insert(d.label).second) {
                throw std::invalid_argument("duplicate design column label: " + d.label);
            }
        }
    }

    const std::vector<double>* wcol = spec.weight.empty() ? nullptr : &data.column(spec.weight);
    out.X.resize(rows.size(), defs.size());
    out.y.resize(rows.size());
    out.w.resize(rows.size());
    out.row_index = rows;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::size_t r = rows[i];
        for (std::size_t j = 0; j < defs.size(); ++j) {
            const auto& d = defs[j];
            double v;
            if (d.constant) {
                v = 1.0;
            } else if (d.indicator) {
                v = ((*d.a)[r] == d.level) ? 1.0 : 0.0;
            } else if (d.b) {
                v = (*d.a)[r] * (*d.b)[r];
            } else {
                v = (*d.a)[r];
            }
            out.X(i, j) = v;
        }
        out.y(i) = response ? (*response)[r] : std::nan("");
        double wi = wcol ? (*wcol)[r] : 1.0;
        if (wi < 0.0) {
            throw std::invalid_argument("negative regression weight");
        }
        out.w(i) = wi;
    }
    out.labels.reserve(defs.size());
    for (auto& d : defs) out.labels.push_back(std::move(d.label));
    return out;
}

} // namespace qmig
