#pragma once

#include <cstddef>
#include <limits>
#include <string_view>
#include <utility>
#include <vector>

namespace sles::lp {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class Sense { equal, less_equal, greater_equal };
enum class Status { optimal, infeasible, unbounded, iteration_limit };

std::string_view to_string(Status s);

struct Term {
    size_t var;
    double coeff;
};

// minimize cost . x  subject to  rows, lower <= x <= upper.
// Lower bounds must be finite; upper bounds may be kInfinity.
class Problem {
public:
    size_t add_variable(double cost, double lower, double upper);
    void add_row(std::vector<Term> terms, Sense sense, double rhs);

    size_t num_variables() const { return cost_.size(); }
    size_t num_rows() const { return rows_.size(); }

    struct Row {
        std::vector<Term> terms;
        Sense sense;
        double rhs;
    };
    const std::vector<double>& cost() const { return cost_; }
    const std::vector<double>& lower() const { return lower_; }
    const std::vector<double>& upper() const { return upper_; }
    const std::vector<Row>& rows() const { return rows_; }

private:
    std::vector<double> cost_, lower_, upper_;
    std::vector<Row> rows_;
};

struct Options {
    size_t max_iterations = 200000;
    size_t refactor_every = 200;
    double feasibility_tol = 1e-8;
    double optimality_tol = 1e-9;
};

struct Result {
    Status status = Status::iteration_limit;
    std::vector<double> x;
    double objective = 0.0;
    size_t iterations = 0;
};

// Two-phase bounded-variable revised simplex with a dense basis inverse.
Result solve(const Problem& problem, const Options& options = {});

} // namespace sles::lp
