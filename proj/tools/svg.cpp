#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace fdepi::plot {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

class Canvas {
  public:
    Canvas(double w, double h) : w_(w), h_(h) {}
    void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width = 1.0,
              bool dashed = false) {
        body_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\""
              << num(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << "\""
              << (dashed ? " stroke-dasharray=\"4 3\"" : "") << "/>\n";
    }
    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke, double width,
                  bool dashed) {
        body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << "\""
              << (dashed ? " stroke-dasharray=\"5 3\"" : "") << " points=\"";
        for (const auto& [x, y] : pts) body_ << num(x) << "," << num(y) << " ";
        body_ << "\"/>\n";
    }
    void polygon(const std::vector<std::pair<double, double>>& pts, const std::string& fill) {
        body_ << "<polygon fill=\"" << fill << "\" stroke=\"none\" points=\"";
        for (const auto& [x, y] : pts) body_ << num(x) << "," << num(y) << " ";
        body_ << "\"/>\n";
    }
    void rect(double x, double y, double w, double h, const std::string& fill) {
        body_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\""
              << num(h) << "\" fill=\"" << fill << "\"/>\n";
    }
    void text(double x, double y, const std::string& s, int size = 11, const std::string& anchor = "start",
              double rotate = 0.0) {
        body_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << size
              << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\"";
        if (rotate != 0.0) body_ << " transform=\"rotate(" << num(rotate) << " " << num(x) << " " << num(y) << ")\"";
        body_ << ">" << escape(s) << "</text>\n";
    }
    std::string str() const {
        std::ostringstream out;
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w_) << "\" height=\"" << num(h_)
            << "\" viewBox=\"0 0 " << num(w_) << " " << num(h_) << "\">\n"
            << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
            << body_.str() << "</svg>\n";
        return out.str();
    }

  private:
    double w_, h_;
    std::ostringstream body_;
};

std::string rgb(double r, double g, double b) {
    char buf[8];
    auto c = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255)); };
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c(r), c(g), c(b));
    return buf;
}

// Blue - white - red, s in [-1, 1].
std::string diverging(double s) {
    s = std::clamp(s, -1.0, 1.0);
    if (s < 0) return rgb(1 + s * 0.85, 1 + s * 0.6, 1.0);
    return rgb(1.0, 1 - s * 0.75, 1 - s * 0.85);
}

// Light to dark, s in [0, 1].
std::string sequential(double s) {
    s = std::clamp(s, 0.0, 1.0);
    return rgb(1 - 0.8 * s, 1 - 0.55 * s, 1 - 0.2 * s);
}

// Leaf positions in [0, 1) and node heights of a dendrogram.
struct TreeLayout {
    std::vector<double> leaf_pos;
    std::vector<double> node_pos;
    double max_height = 0.0;
};

TreeLayout layout(const Dendrogram& d) {
    TreeLayout t;
    const std::size_t n = d.labels.size();
    t.leaf_pos.assign(n, 0.0);
    for (std::size_t k = 0; k < d.order.size(); ++k) t.leaf_pos[d.order[k]] = (k + 0.5) / static_cast<double>(n);
    t.node_pos.assign(d.merge.size(), 0.0);
    for (std::size_t s = 0; s < d.merge.size(); ++s) {
        double p = 0.0;
        for (int op : d.merge[s]) p += op < 0 ? t.leaf_pos[static_cast<std::size_t>(-op - 1)] : t.node_pos[op - 1];
        t.node_pos[s] = p / 2;
        t.max_height = std::max(t.max_height, d.heights[s]);
    }
    return t;
}

// Draws the tree with leaves along `span` (pixels from `start`) and heights
// growing away from the baseline.
void draw_tree(Canvas& c, const Dendrogram& d, bool vertical_leaves, double start, double span, double base,
               double depth) {
    const auto t = layout(d);
    const double hmax = t.max_height > 0 ? t.max_height : 1.0;
    auto height_of = [&](int op) { return op < 0 ? 0.0 : d.heights[op - 1]; };
    auto pos_of = [&](int op) { return op < 0 ? t.leaf_pos[static_cast<std::size_t>(-op - 1)] : t.node_pos[op - 1]; };
    for (std::size_t s = 0; s < d.merge.size(); ++s) {
        const double top = base - depth * d.heights[s] / hmax;
        const double a = start + span * pos_of(d.merge[s][0]);
        const double b = start + span * pos_of(d.merge[s][1]);
        const double ha = base - depth * height_of(d.merge[s][0]) / hmax;
        const double hb = base - depth * height_of(d.merge[s][1]) / hmax;
        if (vertical_leaves) {
            // leaves along y, heights along x (tree on the left)
            c.line(ha, a, top, a, "#333333");
            c.line(hb, b, top, b, "#333333");
            c.line(top, a, top, b, "#333333");
        } else {
            c.line(a, ha, a, top, "#333333");
            c.line(b, hb, b, top, "#333333");
            c.line(a, top, b, top, "#333333");
        }
    }
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void add(const Eigen::VectorXd& v) {
        if (v.size() == 0) return;
        lo = std::min(lo, v.minCoeff());
        hi = std::max(hi, v.maxCoeff());
    }
    void settle() {
        if (!std::isfinite(lo)) lo = 0, hi = 1;
        if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
        const double pad = 0.04 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
};

}  // namespace

std::string group_color(std::size_t group) {
    static const char* palette[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    return palette[group % 6];
}

std::string lines(const std::string& title, const std::vector<Series>& series, const std::vector<Band>& bands,
                  const std::string& x_label, const std::string& y_label) {
    const double W = 720, H = 440, L = 70, R = 170, T = 40, B = 50;
    Canvas c(W, H);
    Range yr;
    Eigen::Index n = 0;
    for (const auto& s : series) yr.add(s.y), n = std::max(n, s.y.size());
    for (const auto& b : bands) yr.add(b.lower), yr.add(b.upper), n = std::max(n, b.lower.size());
    yr.settle();
    const double pw = W - L - R, ph = H - T - B;
    auto X = [&](double i) { return L + pw * (n > 1 ? i / static_cast<double>(n - 1) : 0.5); };
    auto Y = [&](double v) { return T + ph * (1 - (v - yr.lo) / (yr.hi - yr.lo)); };

    c.text(W / 2, 22, title, 14, "middle");
    c.line(L, T + ph, L + pw, T + ph, "#000000");
    c.line(L, T, L, T + ph, "#000000");
    for (int k = 0; k <= 4; ++k) {
        const double v = yr.lo + (yr.hi - yr.lo) * k / 4.0;
        c.line(L - 4, Y(v), L, Y(v), "#000000");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", v);
        c.text(L - 6, Y(v) + 4, buf, 10, "end");
    }
    for (Eigen::Index i = 0; i < n; i += std::max<Eigen::Index>(1, n / 6)) {
        c.line(X(static_cast<double>(i)), T + ph, X(static_cast<double>(i)), T + ph + 4, "#000000");
        c.text(X(static_cast<double>(i)), T + ph + 16, std::to_string(i), 10, "middle");
    }
    c.text(L + pw / 2, H - 12, x_label, 11, "middle");
    if (!y_label.empty()) c.text(16, T + ph / 2, y_label, 11, "middle", -90);
    if (yr.lo < 0 && yr.hi > 0) c.line(L, Y(0), L + pw, Y(0), "#999999", 0.5, true);

    for (const auto& b : bands) {
        std::vector<std::pair<double, double>> pts;
        for (Eigen::Index i = 0; i < b.upper.size(); ++i) pts.emplace_back(X(static_cast<double>(i)), Y(b.upper(i)));
        for (Eigen::Index i = b.lower.size(); i-- > 0;) pts.emplace_back(X(static_cast<double>(i)), Y(b.lower(i)));
        c.polygon(pts, b.color);
    }
    double ly = T + 6;
    for (const auto& s : series) {
        std::vector<std::pair<double, double>> pts;
        for (Eigen::Index i = 0; i < s.y.size(); ++i) pts.emplace_back(X(static_cast<double>(i)), Y(s.y(i)));
        c.polyline(pts, s.color, s.width, s.dashed);
        if (!s.label.empty() && ly < T + ph) {
            c.line(L + pw + 10, ly, L + pw + 28, ly, s.color, s.width, s.dashed);
            c.text(L + pw + 32, ly + 4, s.label, 10);
            ly += 14;
        }
    }
    return c.str();
}

std::string heatmap(const std::string& title, const Eigen::MatrixXd& m, const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& col_labels, const Dendrogram* row_tree,
                    const Dendrogram* col_tree, std::optional<double> center) {
    const auto rows = static_cast<std::size_t>(m.rows());
    const auto cols = static_cast<std::size_t>(m.cols());
    const double cell = 18, tree = row_tree || col_tree ? 90 : 0, label_w = 170, label_h = 150;
    const double L = 10 + (row_tree ? tree : 0), T = 40 + (col_tree ? tree : 0);
    const double W = L + cell * static_cast<double>(cols) + label_w;
    const double H = T + cell * static_cast<double>(rows) + label_h;
    Canvas c(W, H);
    c.text(W / 2, 22, title, 14, "middle");

    std::vector<std::size_t> ro(rows), co(cols);
    for (std::size_t i = 0; i < rows; ++i) ro[i] = i;
    for (std::size_t j = 0; j < cols; ++j) co[j] = j;
    if (row_tree) ro = row_tree->order;
    if (col_tree) co = col_tree->order;

    double scale = 0.0, lo = m.size() ? m.minCoeff() : 0.0, hi = m.size() ? m.maxCoeff() : 1.0;
    if (center) scale = std::max(std::abs(hi - *center), std::abs(lo - *center));
    for (std::size_t a = 0; a < rows; ++a) {
        for (std::size_t b = 0; b < cols; ++b) {
            const double v = m(static_cast<Eigen::Index>(ro[a]), static_cast<Eigen::Index>(co[b]));
            std::string fill;
            if (!std::isfinite(v)) fill = "#dddddd";
            else if (center) fill = diverging(scale > 0 ? (v - *center) / scale : 0.0);
            else fill = sequential(hi > lo ? (v - lo) / (hi - lo) : 0.0);
            c.rect(L + cell * static_cast<double>(b), T + cell * static_cast<double>(a), cell, cell, fill);
        }
        c.text(L + cell * static_cast<double>(cols) + 4, T + cell * (static_cast<double>(a) + 0.7), row_labels[ro[a]], 10);
    }
    for (std::size_t b = 0; b < cols; ++b) {
        const double x = L + cell * (static_cast<double>(b) + 0.6);
        const double y = T + cell * static_cast<double>(rows) + 6;
        c.text(x, y, col_labels[co[b]], 10, "start", 60);
    }
    if (row_tree) draw_tree(c, *row_tree, true, T, cell * static_cast<double>(rows), L - 2, tree - 10);
    if (col_tree) draw_tree(c, *col_tree, false, L, cell * static_cast<double>(cols), T - 2, tree - 10);
    return c.str();
}

std::string pyramid(const std::string& title, const Eigen::MatrixXd& adjusted_p) {
    const auto T = static_cast<double>(adjusted_p.rows());
    const double cell = 8, L = 60, Top = 40;
    const double W = L + cell * T + 120, H = Top + cell * T + 50;
    Canvas c(W, H);
    c.text(W / 2, 22, title, 14, "middle");
    // Row w (scale) from the top: full scale first.
    for (Eigen::Index w = adjusted_p.cols(); w-- > 0;) {
        const double y = Top + cell * (T - 1 - static_cast<double>(w));
        for (Eigen::Index t = 0; t < adjusted_p.rows(); ++t) {
            const double p = adjusted_p(t, w);
            if (!std::isfinite(p)) continue;
            c.rect(L + cell * static_cast<double>(t), y, cell, cell, sequential(1.0 - p));
        }
    }
    c.text(L + cell * T / 2, H - 14, "day", 11, "middle");
    c.text(20, Top + cell * T / 2, "scale", 11, "middle", -90);
    for (int k = 0; k <= 4; ++k) {
        const double p = k / 4.0;
        c.rect(W - 90, Top + 20 * k, 16, 16, sequential(1.0 - p));
        char buf[16];
        std::snprintf(buf, sizeof buf, "p = %.2f", p);
        c.text(W - 70, Top + 20 * k + 12, buf, 10);
    }
    return c.str();
}

std::string bars(const std::string& title, const std::vector<std::string>& labels, const std::vector<double>& values) {
    const double row = 18, L = 190, T = 40, pw = 380;
    const double W = L + pw + 80, H = T + row * static_cast<double>(labels.size()) + 30;
    Canvas c(W, H);
    c.text(W / 2, 22, title, 14, "middle");
    double lo = 0.0, hi = 0.0;
    for (double v : values) lo = std::min(lo, v), hi = std::max(hi, v);
    if (hi - lo < 1e-12) hi = lo + 1;
    auto X = [&](double v) { return L + pw * (v - lo) / (hi - lo); };
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double y = T + row * static_cast<double>(i);
        const double a = X(std::min(0.0, values[i])), b = X(std::max(0.0, values[i]));
        c.rect(a, y + 2, std::max(b - a, 0.5), row - 4, values[i] >= 0 ? "#4a78b5" : "#c0504d");
        c.text(L - 6, y + row * 0.7, labels[i], 10, "end");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", values[i]);
        c.text(std::max(a, b) + 4, y + row * 0.7, buf, 10);
    }
    c.line(X(0), T, X(0), T + row * static_cast<double>(labels.size()), "#000000");
    return c.str();
}

}  // namespace fdepi::plot
