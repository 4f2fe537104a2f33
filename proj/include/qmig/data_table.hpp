#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

// Columnar numeric table feeding the regression design builder.  Missing
// values are NaN.  Categorical variables are stored as numeric level codes;
// the design builder expands them to indicator columns.

namespace qmig {

class DataTable {
public:
    DataTable() = default;
    explicit DataTable(std::size_t n_rows) : n_rows_(n_rows) {}

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_cols() const { return names_.size(); }

    // Adds a column; the first column fixes the row count.
    void add_column(const std::string& name, std::vector<double> values);

    bool has_column(const std::string& name) const;
    const std::vector<double>& column(const std::string& name) const;
    std::vector<double>& column(const std::string& name);
    const std::vector<std::string>& column_names() const { return names_; }

    // Copies the rows with keep[i] == true into a new table (all columns).
    DataTable filter(const std::vector<bool>& keep) const;

private:
    std::size_t n_rows_ = 0;
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::vector<double>> columns_;
};

} // namespace qmig
