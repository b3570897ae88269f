#include "conicpf/hermitian.hpp"

#include <algorithm>
#include <stdexcept>

namespace conicpf {

namespace {

bool entry_less(const HermitianEntry& a, int row, int col) {
    return a.row < row || (a.row == row && a.col < col);
}

}  // namespace

int HermitianSparse::find(int i, int j) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), std::pair{i, j},
                               [](const HermitianEntry& e, const std::pair<int, int>& key) {
                                   return entry_less(e, key.first, key.second);
                               });
    if (it != entries_.end() && it->row == i && it->col == j) {
        return static_cast<int>(it - entries_.begin());
    }
    return -1;
}

void HermitianSparse::add(int i, int j, cplx value) {
    if (i < 0 || j < 0 || i >= dim_ || j >= dim_) {
        throw std::out_of_range("hermitian entry index out of range");
    }
    if (i > j) {
        std::swap(i, j);
        value = std::conj(value);
    }
    if (i == j) {
        value = cplx(value.real(), 0.0);
    }
    auto it = std::lower_bound(entries_.begin(), entries_.end(), std::pair{i, j},
                               [](const HermitianEntry& e, const std::pair<int, int>& key) {
                                   return entry_less(e, key.first, key.second);
                               });
    if (it != entries_.end() && it->row == i && it->col == j) {
        it->value += value;
    } else {
        entries_.insert(it, HermitianEntry{i, j, value});
    }
}

cplx HermitianSparse::at(int i, int j) const {
    if (i <= j) {
        int k = find(i, j);
        return k < 0 ? cplx{} : entries_[k].value;
    }
    int k = find(j, i);
    return k < 0 ? cplx{} : std::conj(entries_[k].value);
}

bool HermitianSparse::contains(int i, int j) const {
    return i <= j ? find(i, j) >= 0 : find(j, i) >= 0;
}

double HermitianSparse::quadratic_form(const CVector& v) const {
    double acc = 0.0;
    for (const auto& e : entries_) {
        if (e.row == e.col) {
            acc += e.value.real() * std::norm(v[e.row]);
        } else {
            acc += 2.0 * (std::conj(v[e.row]) * e.value * v[e.col]).real();
        }
    }
    return acc;
}

double HermitianSparse::trace_product(const CMatrix& x) const {
    // Tr(MX) = sum_i M_ii X_ii + 2 Re sum_{i<j} M_ij conj(X_ij)
    double acc = 0.0;
    for (const auto& e : entries_) {
        if (e.row == e.col) {
            acc += e.value.real() * x(e.row, e.row).real();
        } else {
            acc += 2.0 * (e.value * std::conj(x(e.row, e.col))).real();
        }
    }
    return acc;
}

double HermitianSparse::trace_product(const HermitianSparse& x) const {
    double acc = 0.0;
    for (const auto& e : entries_) {
        cplx xv = x.at(e.row, e.col);
        if (e.row == e.col) {
            acc += e.value.real() * xv.real();
        } else {
            acc += 2.0 * (e.value * std::conj(xv)).real();
        }
    }
    return acc;
}

CVector HermitianSparse::multiply(const CVector& v) const {
    CVector out = CVector::Zero(dim_);
    for (const auto& e : entries_) {
        out[e.row] += e.value * v[e.col];
        if (e.row != e.col) {
            out[e.col] += std::conj(e.value) * v[e.row];
        }
    }
    return out;
}

CMatrix HermitianSparse::to_dense() const {
    CMatrix m = CMatrix::Zero(dim_, dim_);
    for (const auto& e : entries_) {
        m(e.row, e.col) = e.value;
        m(e.col, e.row) = std::conj(e.value);
    }
    return m;
}

HermitianSparse HermitianSparse::from_dense(const CMatrix& m, double drop_tol) {
    HermitianSparse out(static_cast<int>(m.rows()));
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = i; j < m.cols(); ++j) {
            cplx val = i == j ? cplx(m(i, i).real(), 0.0) : 0.5 * (m(i, j) + std::conj(m(j, i)));
            if (std::abs(val) > drop_tol) {
                out.entries_.push_back(HermitianEntry{i, j, val});
            }
        }
    }
    return out;
}

HermitianSparse& HermitianSparse::operator+=(const HermitianSparse& other) {
    if (other.dim_ != dim_) {
        throw std::invalid_argument("hermitian dimension mismatch");
    }
    std::vector<HermitianEntry> merged = entries_;
    merged.insert(merged.end(), other.entries_.begin(), other.entries_.end());
    *this = from_entries(dim_, std::move(merged));
    return *this;
}

HermitianSparse HermitianSparse::scaled(double factor) const {
    HermitianSparse out = *this;
    for (auto& e : out.entries_) {
        e.value *= factor;
    }
    return out;
}

std::vector<std::pair<int, int>> HermitianSparse::off_diagonal_support() const {
    std::vector<std::pair<int, int>> out;
    for (const auto& e : entries_) {
        if (e.row != e.col && e.value != cplx{}) {
            out.emplace_back(e.row, e.col);
        }
    }
    return out;
}

HermitianSparse HermitianSparse::from_entries(int dim, std::vector<HermitianEntry> entries) {
    HermitianSparse out(dim);
    for (auto& e : entries) {
        if (e.row < 0 || e.col < 0 || e.row >= dim || e.col >= dim) {
            throw std::out_of_range("hermitian entry index out of range");
        }
        if (e.row > e.col) {
            std::swap(e.row, e.col);
            e.value = std::conj(e.value);
        }
        if (e.row == e.col) e.value = cplx(e.value.real(), 0.0);
    }
    std::sort(entries.begin(), entries.end(), [](const HermitianEntry& a, const HermitianEntry& b) {
        return entry_less(a, b.row, b.col);
    });
    for (const auto& e : entries) {
        if (!out.entries_.empty() && out.entries_.back().row == e.row && out.entries_.back().col == e.col) {
            out.entries_.back().value += e.value;
        } else {
            out.entries_.push_back(e);
        }
    }
    return out;
}

}  // namespace conicpf
