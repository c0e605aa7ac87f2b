//! Stick-figure strips: one side-view skeleton per sampled frame, bones as
//! line segments. Known frames draw gray, gap frames green. Output is plain
//! SVG with nothing non-deterministic in it.

use crate::AppError;
use mofill::motion::{PoseClip, JOINTS};
use mofill::tasks::GapSet;
use std::fmt::Write as _;

const KNOWN_COLOR: &str = "#999999";
const GAP_COLOR: &str = "#2e9e44";
const MARGIN: f64 = 12.0;

pub fn render_clip_svg(clip: &PoseClip, gaps: &GapSet, stride: usize) -> Result<String, AppError> {
    if stride == 0 {
        return Err(AppError::usage("stride must be ≥ 1"));
    }
    let frames: Vec<usize> = (0..clip.frames()).step_by(stride).collect();

    // side view: joint x spans the figure, joint y is height
    let mut max_abs_x = 1.0f64;
    let mut max_y = 1.0f64;
    for &t in &frames {
        for j in 0..JOINTS {
            let p = clip.joint(j, t);
            max_abs_x = max_abs_x.max(p[0].abs());
            max_y = max_y.max(p[1]);
        }
    }
    let spacing = (2.0 * max_abs_x + 16.0).max(60.0);
    let height = max_y + 2.0 * MARGIN;
    let width = spacing * frames.len() as f64 + 2.0 * MARGIN;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, &t) in frames.iter().enumerate() {
        let color = if gaps.covers(t) { GAP_COLOR } else { KNOWN_COLOR };
        let cx = MARGIN + spacing * (i as f64 + 0.5);
        let _ = writeln!(svg, r#"<g stroke="{color}" stroke-width="2" stroke-linecap="round">"#);
        for &(parent, child) in &clip.skeleton.edges {
            let p = clip.joint(parent, t);
            let c = clip.joint(child, t);
            let _ = writeln!(
                svg,
                r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}"/>"#,
                cx + p[0],
                height - MARGIN - p[1],
                cx + c[0],
                height - MARGIN - c[1],
            );
        }
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mofill::motion::synth::{synth_generate, MotionFamily};

    #[test]
    fn strip_is_well_formed_and_colors_gaps() {
        let clip = synth_generate(MotionFamily::Walk, 1, 3).remove(0);
        let gaps = GapSet::new(vec![(90, 60)], clip.frames()).unwrap();
        let svg = render_clip_svg(&clip, &gaps, 30).unwrap();
        assert!(svg.starts_with("<svg "));
        assert!(svg.trim_end().ends_with("</svg>"));
        // 240 frames at stride 30 → 8 figures, 21 bones each
        assert_eq!(svg.matches("<g ").count(), 8);
        assert_eq!(svg.matches("<line ").count(), 8 * 21);
        assert_eq!(svg.matches("</g>").count(), 8);
        assert!(svg.contains(GAP_COLOR) && svg.contains(KNOWN_COLOR));
        assert!(!svg.contains("NaN"));
        // deterministic
        assert_eq!(svg, render_clip_svg(&clip, &gaps, 30).unwrap());
    }

    #[test]
    fn no_gaps_means_all_gray_and_stride_t_gives_one_figure() {
        let clip = synth_generate(MotionFamily::Idle, 1, 4).remove(0);
        let svg = render_clip_svg(&clip, &GapSet::empty(), clip.frames()).unwrap();
        assert_eq!(svg.matches("<g ").count(), 1);
        assert!(!svg.contains(GAP_COLOR));
        assert!(render_clip_svg(&clip, &GapSet::empty(), 0).is_err());
    }
}
