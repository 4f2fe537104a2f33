#include "qmig/data_table.hpp"

#include <stdexcept>

namespace qmig {

void DataTable::add_column(const std::string& name, std::vector<double> values) {
    if (index_.count(name)) {
        throw std::invalid_argument("duplicate column: " + name);
    }
    if (names_.empty() && n_rows_ == 0) {
        n_rows_ = values.size();
    }
    if (values.size() != n_rows_) {
        throw std::invalid_argument("column '" + name + "' has " +
                                    std::to_string(values.size()) + " rows, table has " +
                                    std::to_string(n_rows_));
    }
    index_[name] = names_.size();
    names_.push_back(name);
    columns_.push_back(std::move(values));
}

bool DataTable::has_column(const std::string& name) const {
    return index_.count(name) != 0;
}

const std::vector<double>& DataTable::column(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("unknown variable: " + name);
    return columns_[it->second];
}

std::vector<double>& DataTable::column(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("unknown variable: " + name);
    return columns_[it->second];
}

DataTable DataTable::filter(const std::vector<bool>& keep) const {
    if (keep.size() != n_rows_) {
        throw std::invalid_argument("filter mask length does not match row count");
    }
    std::size_t kept = 0;
    for (bool k : keep) kept += k ? 1 : 0;
    DataTable out(kept);
    for (std::size_t c = 0; c < names_.size(); ++c) {
        std::vector<double> col;
        col.reserve(kept);
        for (std::size_t r = 0; r < n_rows_; ++r) {
            if (keep[r]) col.push_back(columns_[c][r]);
        }
        out.add_column(names_[c], std::move(col));
    }
    return out;
}

} // namespace qmig
