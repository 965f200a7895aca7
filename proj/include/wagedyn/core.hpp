#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace wagedyn {

/// Raised when an input file or config violates its declared format.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Raised when an operation's preconditions are not met.
class PreconditionError : public std::invalid_argument {
public:
    explicit PreconditionError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// One worker-year record. `exper` always equals `year - cohort`.
struct PanelObservation {
    long person_id = 0;
    int year = 0;
    int cohort = 0;               // labor-market entry year
    std::string educ;             // e.g. "NC" / "CL"
    std::string race;
    int exper = 0;
    std::optional<std::string> occ;
    std::optional<long> firm;
    double log_wage = 0.0;
    std::optional<double> tscore;
};

struct Panel {
    std::vector<PanelObservation> rows;

    std::size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }
};

inline void validate_observation(const PanelObservation& o, long line = -1) {
    auto where = [&] { return line >= 0 ? " (line " + std::to_string(line) + ")" : std::string(); };
    if (o.exper != o.year - o.cohort)
        throw InputError("experience inconsistency: exper=" + std::to_string(o.exper) +
                         " but year-cohort=" + std::to_string(o.year - o.cohort) + where());
    if (o.exper < 1)
        throw InputError("experience < 1 for person " + std::to_string(o.person_id) +
                         " in year " + std::to_string(o.year) + where());
    if (!std::isfinite(o.log_wage))
        throw InputError("non-finite log wage for person " + std::to_string(o.person_id) +
                         " in year " + std::to_string(o.year) + where());
}

/// Checks all row invariants including (person, year) uniqueness.
inline void validate_panel(const Panel& p) {
    std::unordered_map<long, std::vector<int>> seen;
    for (const auto& o : p.rows) {
        validate_observation(o);
        auto& yrs = seen[o.person_id];
        for (int y : yrs)
            if (y == o.year)
                throw InputError("duplicate (person, year): (" + std::to_string(o.person_id) +
                                 ", " + std::to_string(o.year) + ")");
        yrs.push_back(o.year);
    }
}

/// person -> (year -> row index), built once per panel where needed.
using PanelIndex = std::unordered_map<long, std::map<int, std::size_t>>;

inline PanelIndex build_index(const Panel& p) {
    PanelIndex idx;
    for (std::size_t i = 0; i < p.rows.size(); ++i)
        idx[p.rows[i].person_id][p.rows[i].year] = i;
    return idx;
}

inline bool nearly_equal(double a, double b, double rel = 1e-11) {
    double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) <= rel * scale;
}

}  // namespace wagedyn
