#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace pgflow {

//! Minimal SVG line/scatter plotter for experiment outputs.
class SvgPlot {
public:
    SvgPlot(int width = 640, int height = 420) : w_(width), h_(height) {}

    void set_log_log(bool on) { loglog_ = on; }
    void set_title(const std::string& t) { title_ = t; }

    void add_line(const std::vector<double>& xs, const std::vector<double>& ys,
                  const std::string& color = "#1f77b4") {
        series_.push_back({xs, ys, color, false});
    }
    void add_points(const std::vector<double>& xs,
                    const std::vector<double>& ys,
                    const std::string& color = "#d62728") {
        series_.push_back({xs, ys, color, true});
    }
    void annotate(const std::string& text) { notes_.push_back(text); }

    void write(const std::string& path, const std::string& comment = "") const {
        double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
        for (const auto& s : series_)
            for (size_t i = 0; i < s.xs.size(); ++i) {
                double x = tx(s.xs[i]), y = tx(s.ys[i]);
                if (!std::isfinite(x) || !std::isfinite(y)) continue;
                xmin = std::min(xmin, x);
                xmax = std::max(xmax, x);
                ymin = std::min(ymin, y);
                ymax = std::max(ymax, y);
            }
        if (xmin > xmax) { xmin = 0; xmax = 1; ymin = 0; ymax = 1; }
        if (xmax - xmin < 1e-12) { xmax += 1; xmin -= 1; }
        if (ymax - ymin < 1e-12) { ymax += 1; ymin -= 1; }
        const double ml = 50, mb = 30, mt = 30, mr = 15;
        auto px = [&](double x) {
            return ml + (tx(x) - xmin) / (xmax - xmin) * (w_ - ml - mr);
        };
        auto py = [&](double y) {
            return h_ - mb - (tx(y) - ymin) / (ymax - ymin) * (h_ - mb - mt);
        };
        std::ostringstream o;
        o << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w_
          << "' height='" << h_ << "'>\n";
        if (!comment.empty()) o << "<!-- " << comment << " -->\n";
        o << "<rect width='100%' height='100%' fill='white'/>\n";
        o << "<text x='" << w_ / 2 << "' y='18' text-anchor='middle' "
          << "font-size='14'>" << title_ << "</text>\n";
        // axes
        o << "<line x1='" << ml << "' y1='" << h_ - mb << "' x2='" << w_ - mr
          << "' y2='" << h_ - mb << "' stroke='black'/>\n";
        o << "<line x1='" << ml << "' y1='" << h_ - mb << "' x2='" << ml
          << "' y2='" << mt << "' stroke='black'/>\n";
        for (const auto& s : series_) {
            if (s.scatter) {
                for (size_t i = 0; i < s.xs.size(); ++i)
                    o << "<circle cx='" << px(s.xs[i]) << "' cy='"
                      << py(s.ys[i]) << "' r='3' fill='" << s.color << "'/>\n";
            } else {
                o << "<polyline fill='none' stroke='" << s.color
                  << "' stroke-width='1.5' points='";
                for (size_t i = 0; i < s.xs.size(); ++i)
                    o << px(s.xs[i]) << "," << py(s.ys[i]) << " ";
                o << "'/>\n";
            }
        }
        int line = 0;
        for (const auto& n : notes_)
            o << "<text x='" << ml + 8 << "' y='" << mt + 14 + 14 * line++
              << "' font-size='11'>" << n << "</text>\n";
        o << "</svg>\n";
        std::ofstream f(path);
        f << o.str();
    }

private:
    struct Series {
        std::vector<double> xs, ys;
        std::string color;
        bool scatter;
    };
    double tx(double v) const {
        return loglog_ ? std::log10(std::max(v, 1e-300)) : v;
    }
    int w_, h_;
    bool loglog_ = false;
    std::string title_;
    std::vector<Series> series_;
    std::vector<std::string> notes_;
};

} // namespace pgflow
