#pragma once

// Anderson mixing for fixed-point iterations x <- G(x).

#include <Eigen/Dense>

#include <cstddef>
#include <deque>
#include <vector>

namespace crowdgame {

/// Type-II Anderson acceleration with a sliding window of `depth` secant
/// pairs. Given the current iterate x and its image G(x), next() returns the
/// extrapolated iterate; with an empty window that is simply G(x).
class AndersonMixer {
public:
    explicit AndersonMixer(std::size_t depth) : depth_(depth) {}

    std::vector<double> next(const std::vector<double>& x, const std::vector<double>& gx) {
        const auto n = static_cast<Eigen::Index>(x.size());
        Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(gx.data(), n);
        Eigen::VectorXd f = g - Eigen::Map<const Eigen::VectorXd>(x.data(), n);

        if (has_prev_ && depth_ > 0) {
            dF_.push_back(f - prev_f_);
            dG_.push_back(g - prev_g_);
            if (dF_.size() > depth_) {
                dF_.pop_front();
                dG_.pop_front();
            }
        }
        prev_f_ = f;
        prev_g_ = g;
        has_prev_ = true;

        std::vector<double> out(gx);
        if (dF_.empty()) return out;

        const auto m = static_cast<Eigen::Index>(dF_.size());
        Eigen::MatrixXd F(n, m), G(n, m);
        for (Eigen::Index j = 0; j < m; ++j) {
            F.col(j) = dF_[static_cast<std::size_t>(j)];
            G.col(j) = dG_[static_cast<std::size_t>(j)];
        }
        const Eigen::VectorXd gamma = F.completeOrthogonalDecomposition().solve(f);
        if (!gamma.allFinite()) return out;
        Eigen::Map<Eigen::VectorXd>(out.data(), n) = g - G * gamma;
        return out;
    }

    void reset() {
        dF_.clear();
        dG_.clear();
        has_prev_ = false;
    }

    std::size_t window() const noexcept { return dF_.size(); }

private:
    std::size_t depth_;
    std::deque<Eigen::VectorXd> dF_;
    std::deque<Eigen::VectorXd> dG_;
    Eigen::VectorXd prev_f_;
    Eigen::VectorXd prev_g_;
    bool has_prev_ = false;
};

}  // namespace crowdgame
