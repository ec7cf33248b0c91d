use filippov_lab::output::{fmt_csv, fmt_svg, render_svg, Curve, SvgStyle, Table};

#[test]
fn single_curve_has_one_polyline() {
    let svg = render_svg(&[Curve::new("line", "#000", vec![(0.0, 0.0), (1.0, 2.0)])], &SvgStyle::default()).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1);
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn rendering_is_deterministic() {
    let pts: Vec<(f64, f64)> = (0..50).map(|i| (i as f64 * 0.1, (i as f64 * 0.1).sin())).collect();
    let curves = [Curve::new("sin", "#1f4e9c", pts.clone()), Curve::new("cos", "#c0392b", pts).dashed()];
    let style = SvgStyle { title: "a < b & c".into(), annotations: vec![(1.0, 0.5, "label".into())], ..Default::default() };
    let first = render_svg(&curves, &style).unwrap();
    assert_eq!(first, render_svg(&curves, &style).unwrap());
    assert!(first.contains("a &lt; b &amp; c"));
    assert_eq!(first.matches("<polyline").count(), 2);
}

#[test]
fn empty_input_is_rejected() {
    assert!(render_svg(&[], &SvgStyle::default()).is_err());
    assert!(render_svg(&[Curve::new("e", "#000", vec![])], &SvgStyle::default()).is_err());
}

#[test]
fn number_formats() {
    assert_eq!(fmt_svg(1.0), "1");
    assert_eq!(fmt_svg(0.123456789), "0.123457");
    assert_eq!(fmt_svg(f64::NAN), "0");
    for v in [0.1, -3.0e-17, 1.0 / 3.0, 12345.678] {
        assert_eq!(fmt_csv(v).parse::<f64>().unwrap(), v);
    }
    let mut t = Table::new(&["a", "b"]);
    t.push_numbers(&[1.0, 2.0]);
    t.push_row(vec!["x".into(), "y".into()]);
    assert_eq!(t.to_csv(), format!("a,b\n{},{}\nx,y\n", fmt_csv(1.0), fmt_csv(2.0)));
}
