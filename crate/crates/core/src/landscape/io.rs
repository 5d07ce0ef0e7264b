//! Plain-text grid files: a header line
//! `HMAP1 nx ny dx_um dy_um x0_um y0_um` followed by `ny` rows of `nx`
//! whitespace-separated values, row `iy = 0` first.

use std::fmt::Write as _;
use std::path::Path;

use super::HeightMap;
use crate::error::{Error, Result};
use crate::grid::Grid;

pub const HEADER_TOKEN: &str = "HMAP1";

/// Writes any per-node field on `grid`, ten significant digits per value.
pub fn write_grid_field(path: impl AsRef<Path>, grid: &Grid, values: &[f64]) -> Result<()> {
    std::fs::write(path, format_grid_field(grid, values))?;
    Ok(())
}

pub(crate) fn format_grid_field(grid: &Grid, values: &[f64]) -> String {
    assert_eq!(values.len(), grid.len(), "field does not match grid");
    let mut out = String::with_capacity(grid.len() * 17 + 64);
    let _ = writeln!(
        out,
        "{HEADER_TOKEN} {} {} {} {} {} {}",
        grid.nx, grid.ny, grid.dx, grid.dy, grid.x0, grid.y0
    );
    for row in values.chunks(grid.nx) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v:.9e}");
        }
        out.push('\n');
    }
    out
}

pub fn read_grid_field(path: impl AsRef<Path>) -> Result<(Grid, Vec<f64>)> {
    parse_grid_field(&std::fs::read_to_string(path)?)
}

pub(crate) fn parse_grid_field(text: &str) -> Result<(Grid, Vec<f64>)> {
    let perr = |line: usize, message: String| Error::Parse { line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines
        .next()
        .ok_or_else(|| perr(1, "empty file".into()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.first() != Some(&HEADER_TOKEN) {
        return Err(perr(1, format!("expected header token {HEADER_TOKEN}")));
    }
    if tokens.len() != 7 {
        return Err(perr(1, format!("header needs 7 fields, found {}", tokens.len())));
    }
    let int = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| perr(1, format!("bad node count {s:?}")))
    };
    let float = |s: &str| s.parse::<f64>().map_err(|_| perr(1, format!("bad number {s:?}")));
    let (nx, ny) = (int(tokens[1])?, int(tokens[2])?);
    let grid = Grid::new(
        nx,
        ny,
        float(tokens[3])?,
        float(tokens[4])?,
        float(tokens[5])?,
        float(tokens[6])?,
    )
    .map_err(|e| perr(1, e.to_string()))?;

    let mut values = Vec::with_capacity(grid.len());
    let mut rows = 0;
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        rows += 1;
        if rows > ny {
            return Err(perr(lineno, format!("more than the {ny} rows declared in the header")));
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            let v = tok
                .parse::<f64>()
                .map_err(|_| perr(lineno, format!("bad value {tok:?}")))?;
            values.push(v);
        }
        let got = values.len() - before;
        if got != nx {
            return Err(perr(lineno, format!("row has {got} values, header declares {nx}")));
        }
    }
    if rows != ny {
        return Err(perr(
            text.lines().count(),
            format!("found {rows} rows, header declares {ny}"),
        ));
    }
    Ok((grid, values))
}

pub fn write_heightmap(hmap: &HeightMap, path: impl AsRef<Path>) -> Result<()> {
    write_grid_field(path, &hmap.grid, &hmap.h)
}

pub fn read_heightmap(path: impl AsRef<Path>) -> Result<HeightMap> {
    let (grid, h) = read_grid_field(path)?;
    HeightMap::new(grid, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny() -> String {
        let mut s = String::from("HMAP1 8 8 0.05 0.05 -0.175 -0.175\n");
        for iy in 0..8 {
            let row: Vec<String> = (0..8).map(|ix| format!("{}", iy * 8 + ix)).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    #[test]
    fn parses_literal_map() {
        let (g, v) = parse_grid_field(&tiny()).unwrap();
        assert_eq!((g.nx, g.ny), (8, 8));
        assert_eq!(g.x0, -0.175);
        assert_eq!(v[g.index(3, 2)], 19.0);
    }

    #[test]
    fn row_count_mismatch_is_reported() {
        let text = tiny().replace("HMAP1 8 8", "HMAP1 8 9");
        match parse_grid_field(&text) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("rows")),
            other => panic!("expected parse error, got {other:?}"),
        }
        let text = tiny();
        let mut lines: Vec<&str> = text.lines().collect();
        let short = "1 2 3";
        lines[4] = short;
        match parse_grid_field(&lines.join("\n")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn header_token_is_required() {
        let text = tiny().replace("HMAP1", "HMAP2");
        assert!(matches!(parse_grid_field(&text), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            parse_grid_field("HMAP1 8 8 0.1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::centered(9, 8, 0.05).unwrap();
        let h = HeightMap::new(g, (0..72).map(|i| i as f64 * 7.123_456_789).collect()).unwrap();
        let path = dir.path().join("h.hmap");
        write_heightmap(&h, &path).unwrap();
        let back = read_heightmap(&path).unwrap();
        assert_eq!(back.grid, h.grid);
        for (a, b) in back.h.iter().zip(&h.h) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    proptest! {
        #[test]
        fn text_round_trip(vals in proptest::collection::vec(0.0f64..5000.0, 80)) {
            let g = Grid::new(10, 8, 0.05, 0.05, 1.25, -3.0).unwrap();
            let (g2, back) = parse_grid_field(&format_grid_field(&g, &vals)).unwrap();
            prop_assert_eq!(g2, g);
            for (a, b) in back.iter().zip(&vals) {
                prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
            }
        }
    }
}
