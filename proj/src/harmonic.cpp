#include "gasketlab/harmonic.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>

namespace gasket {

namespace {

struct Level1Network {
    Eigen::MatrixXd laplacian; // conductance 1 per cell edge
    std::array<int, 3> boundary{};
    std::vector<int> interior;
};

Level1Network level1_network(const Fractal& f)
{
    const int n = f.v1_class_count();
    Level1Network net;
    net.laplacian = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < f.n_maps(); ++i)
        for (int a = 0; a < 3; ++a)
            for (int b = a + 1; b < 3; ++b) {
                const int x = f.v1_class(i, a), y = f.v1_class(i, b);
                net.laplacian(x, x) += 1;
                net.laplacian(y, y) += 1;
                net.laplacian(x, y) -= 1;
                net.laplacian(y, x) -= 1;
            }
    for (int c = 0; c < n; ++c) {
        const int b = f.v1_class_boundary(c);
        if (b >= 0)
            net.boundary[static_cast<std::size_t>(b)] = c;
        else
            net.interior.push_back(c);
    }
    return net;
}

// Interior values as a linear function of the boundary triple.
Eigen::MatrixXd interior_response(const Level1Network& net)
{
    const auto ni = static_cast<Eigen::Index>(net.interior.size());
    Eigen::MatrixXd lii(ni, ni), lib(ni, 3);
    for (Eigen::Index a = 0; a < ni; ++a) {
        for (Eigen::Index b = 0; b < ni; ++b)
            lii(a, b) = net.laplacian(net.interior[static_cast<std::size_t>(a)], net.interior[static_cast<std::size_t>(b)]);
        for (int b = 0; b < 3; ++b)
            lib(a, b) = net.laplacian(net.interior[static_cast<std::size_t>(a)], net.boundary[static_cast<std::size_t>(b)]);
    }
    const auto lu = lii.fullPivLu();
    if (!lu.isInvertible())
        throw std::logic_error("level-1 interior system is singular");
    return -lu.solve(lib);
}

bool is_sg(const HarmonicStructure& hs)
{
    return hs.frac().n_maps() == 3 && std::fabs(hs.r - 0.6) < 1e-12;
}

} // namespace

double level1_effective_conductance(const Fractal& f)
{
    const auto net = level1_network(f);
    const Eigen::MatrixXd resp = interior_response(net);
    // Schur complement onto the boundary: L_BB + L_BI * resp.
    Mat3 eff;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            double v = net.laplacian(net.boundary[static_cast<std::size_t>(a)], net.boundary[static_cast<std::size_t>(b)]);
            for (std::size_t k = 0; k < net.interior.size(); ++k)
                v += net.laplacian(net.boundary[static_cast<std::size_t>(a)], net.interior[k]) *
                     resp(static_cast<Eigen::Index>(k), b);
            eff(a, b) = v;
        }
    const double c01 = -eff(0, 1), c02 = -eff(0, 2), c12 = -eff(1, 2);
    if (std::fabs(c01 - c02) > 1e-12 || std::fabs(c01 - c12) > 1e-12)
        throw std::invalid_argument("boundary trace is not D3-symmetric");
    return c01;
}

double solve_renormalization(const Fractal& f)
{
    const double c1 = level1_effective_conductance(f);
    // With conductance 1/r per cell edge the trace is c1/r times the unit triangle.
    const auto mismatch = [c1](double r) { return c1 / r - 1.0; };
    double lo = 1e-6, hi = 1 - 1e-6;
    if (!(mismatch(lo) > 0 && mismatch(hi) < 0))
        throw std::invalid_argument("no regular harmonic structure: renormalization has no root in (0,1)");
    while (hi - lo > 1e-14) {
        const double mid = 0.5 * (lo + hi);
        (mismatch(mid) > 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<Mat3> solve_extension(const Fractal& f, double r)
{
    if (!(r > 0 && r < 1))
        throw std::invalid_argument("solve_extension: r must lie in (0,1)");
    // Uniform conductances scale out of the interior solve; r only fixes energies.
    const auto net = level1_network(f);
    const Eigen::MatrixXd resp = interior_response(net);
    std::vector<int> pos(static_cast<std::size_t>(f.v1_class_count()), -1);
    for (std::size_t k = 0; k < net.interior.size(); ++k)
        pos[static_cast<std::size_t>(net.interior[k])] = static_cast<int>(k);
    std::vector<Mat3> out(static_cast<std::size_t>(f.n_maps()), Mat3::Zero());
    for (int i = 0; i < f.n_maps(); ++i)
        for (int j = 0; j < 3; ++j) {
            const int c = f.v1_class(i, j);
            const int b = f.v1_class_boundary(c);
            if (b >= 0)
                out[static_cast<std::size_t>(i)](j, b) = 1.0;
            else
                out[static_cast<std::size_t>(i)].row(j) = resp.row(pos[static_cast<std::size_t>(c)]);
        }
    return out;
}

Mat3 solve_mass_matrix(const Fractal& f, const std::vector<Mat3>& ext)
{
    // vec(G) is the fixed point of G = sum mu_k A_k^T G A_k with total mass 1.
    Eigen::Matrix<double, 10, 9> sys = Eigen::Matrix<double, 10, 9>::Zero();
    sys.topRows<9>().setIdentity();
    for (int k = 0; k < f.n_maps(); ++k) {
        const Mat3 at = ext[static_cast<std::size_t>(k)].transpose();
        Eigen::Matrix<double, 9, 9> kron;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                kron.block<3, 3>(3 * a, 3 * b) = at(a, b) * at;
        sys.topRows<9>() -= f.weight() * kron;
    }
    sys.row(9).setOnes();
    Eigen::Matrix<double, 10, 1> rhs = Eigen::Matrix<double, 10, 1>::Zero();
    rhs(9) = 1.0;
    const Eigen::Matrix<double, 9, 1> g = sys.colPivHouseholderQr().solve(rhs);
    Mat3 out;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            out(b, a) = g(3 * a + b);
    return 0.5 * (out + out.transpose());
}

HarmonicStructure make_harmonic_structure(const Fractal& f)
{
    HarmonicStructure hs;
    hs.fractal = &f;
    hs.r = solve_renormalization(f);
    hs.extension = solve_extension(f, hs.r);
    hs.mass = solve_mass_matrix(f, hs.extension);
    return hs;
}

Eigen::RowVector3d harmonic_row(const HarmonicStructure& hs, std::string_view word, int vertex)
{
    Eigen::RowVector3d row = Eigen::RowVector3d::Zero();
    row(vertex) = 1.0;
    for (auto it = word.rbegin(); it != word.rend(); ++it)
        row = row * hs.A(*it - '0');
    return row;
}

Eigen::Vector3d harmonic_on_cell(const HarmonicStructure& hs, const Triple& h, std::string_view word)
{
    Eigen::Vector3d v(h[0], h[1], h[2]);
    for (char ch : word)
        v = hs.A(ch - '0') * v;
    return v;
}

double harmonic_eval(const HarmonicStructure& hs, const Triple& h, const Address& a)
{
    return harmonic_row(hs, a.word, a.vertex).dot(Eigen::Vector3d(h[0], h[1], h[2]));
}

VertexFunction sample_harmonic(const HarmonicStructure& hs, const Triple& h, int level)
{
    return sample(mesh_for(hs.frac(), level), [&](const Address& a) { return harmonic_eval(hs, h, a); });
}

double graph_energy(const HarmonicStructure& hs, const VertexFunction& f)
{
    double e = 0;
    for (const auto& [a, b] : f.mesh->edges()) {
        const double d = f[static_cast<std::size_t>(a)] - f[static_cast<std::size_t>(b)];
        e += d * d;
    }
    return e * std::pow(hs.r, -f.level());
}

double discrete_laplacian(const VertexFunction& f, const Address& x)
{
    if (x.word.empty())
        throw std::invalid_argument("discrete_laplacian: x is a boundary point");
    const int i = f.mesh->index(x);
    if (i < 0)
        throw std::invalid_argument("discrete_laplacian: x is not a vertex of this level");
    double s = 0;
    for (int y : f.mesh->adjacent(static_cast<std::size_t>(i)))
        s += f[static_cast<std::size_t>(y)] - f[static_cast<std::size_t>(i)];
    return s;
}

std::vector<double> laplacian_estimate(const std::vector<VertexFunction>& fs, const Address& x)
{
    std::vector<double> out;
    for (const auto& f : fs) {
        const auto& fr = f.mesh->fractal();
        if (fr.n_maps() != 3 || fr.name() != "sg")
            throw std::invalid_argument("laplacian_estimate: pointwise constants are only known for sg");
        out.push_back(1.5 * std::pow(5.0, f.level()) * discrete_laplacian(f, x));
    }
    return out;
}

std::vector<double> normal_derivative(const HarmonicStructure& hs, const std::vector<VertexFunction>& fs,
                                      const CellRef& cell, int vertex)
{
    const auto& fr = hs.frac();
    const Address p = fr.canonical({cell.word, vertex});
    std::vector<double> out;
    for (const auto& f : fs) {
        const int m = f.level();
        if (m < cell.level())
            continue;
        const double fp = f.at(p);
        double s = 0;
        for (const auto& rep : fr.representatives({std::string(), vertex}, m - cell.level())) {
            const std::string sub = cell.word + rep.word;
            for (int j = 0; j < 3; ++j)
                if (j != rep.vertex)
                    s += fp - f.at(fr.canonical({sub, j}));
        }
        out.push_back(std::pow(hs.r, -m) * s);
    }
    return out;
}

VertexFunction weak_rhs(const HarmonicStructure& hs, const VertexFunction& g)
{
    const auto& mesh = *g.mesh;
    VertexFunction out{g.mesh, std::vector<double>(mesh.size(), 0.0)};
    std::vector<double> weight(mesh.size(), 0.0);
    for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
        const auto& ids = mesh.cell(c);
        Eigen::Vector3d gv;
        for (int j = 0; j < 3; ++j)
            gv(j) = g[static_cast<std::size_t>(ids[static_cast<std::size_t>(j)])];
        const Eigen::Vector3d proj = hs.mass * gv; // int h_a g over the cell, per unit measure
        for (int a = 0; a < 3; ++a) {
            const auto v = static_cast<std::size_t>(ids[static_cast<std::size_t>(a)]);
            out.values[v] += proj(a);
            weight[v] += hs.mass.row(a).sum();
        }
    }
    for (std::size_t i = 0; i < mesh.size(); ++i)
        out.values[i] = weight[i] > 0 ? out.values[i] / weight[i] : 0.0;
    return out;
}

DirichletReport dirichlet_solve(const HarmonicStructure& hs, const VertexFunction& rhs, const Triple& boundary)
{
    if (!is_sg(hs))
        throw std::invalid_argument("dirichlet_solve: only the sg structure is supported");
    const int m = rhs.level();
    if (m > kSgDepthCap)
        throw std::invalid_argument("dirichlet_solve: level " + std::to_string(m) + " exceeds depth cap " +
                                    std::to_string(kSgDepthCap));
    const auto& mesh = *rhs.mesh;
    const std::size_t n = mesh.size();
    // Vertices are sorted canonically, so boundary points (empty word) come first.
    std::vector<int> unknown(n, -1);
    int nu = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (!mesh.is_boundary(i))
            unknown[i] = nu++;

    const double scale = 1.5 * std::pow(5.0, m);
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd b(nu);
    VertexFunction u{rhs.mesh, std::vector<double>(n, 0.0)};
    for (std::size_t i = 0; i < n; ++i)
        if (mesh.is_boundary(i))
            u.values[i] = boundary[static_cast<std::size_t>(mesh.vertex(i).vertex)];
    for (std::size_t i = 0; i < n; ++i) {
        const int row = unknown[i];
        if (row < 0)
            continue;
        double bi = -rhs[i] / scale;
        trip.emplace_back(row, row, static_cast<double>(mesh.adjacent(i).size()));
        for (int y : mesh.adjacent(i)) {
            const int col = unknown[static_cast<std::size_t>(y)];
            if (col >= 0)
                trip.emplace_back(row, col, -1.0);
            else
                bi += u.values[static_cast<std::size_t>(y)];
        }
        b(row) = bi;
    }
    Eigen::SparseMatrix<double> k(nu, nu);
    k.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(k);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("dirichlet_solve: factorization failed");
    Eigen::VectorXd x = solver.solve(b);

    const auto residual_of = [&](const Eigen::VectorXd& sol) { return (b - k * sol).cwiseAbs().maxCoeff() * scale; };
    DirichletReport rep;
    double res = residual_of(x);
    while (res > 1e-12 && rep.refinements < 5) {
        const Eigen::VectorXd next = x + solver.solve(b - k * x);
        const double r2 = residual_of(next);
        if (!(r2 < res))
            break;
        x = next;
        res = r2;
        ++rep.refinements;
    }
    for (std::size_t i = 0; i < n; ++i)
        if (unknown[i] >= 0)
            u.values[i] = x(unknown[i]);
    rep.u = std::move(u);
    rep.residual = res;
    return rep;
}

} // namespace gasket
