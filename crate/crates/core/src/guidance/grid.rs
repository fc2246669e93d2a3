use super::GuidanceError;
use crate::image::Image;

/// Tiles four same-sized images row-major: top-left, top-right, bottom-left,
/// bottom-right.
pub fn assemble_grid(views: &[Image]) -> Result<Image, GuidanceError> {
    if views.len() != 4 {
        return Err(GuidanceError::Shape(format!("grid needs 4 views, got {}", views.len())));
    }
    let first = &views[0];
    if let Some(v) = views.iter().find(|v| !v.same_shape(first)) {
        return Err(GuidanceError::Shape(format!(
            "view {}x{}x{} differs from {}x{}x{}",
            v.width, v.height, v.channels, first.width, first.height, first.channels
        )));
    }
    let (w, h, c) = (first.width, first.height, first.channels);
    let mut grid = Image::new(2 * w, 2 * h, c);
    let row = w * c;
    for (k, v) in views.iter().enumerate() {
        let (ox, oy) = ((k % 2) * w, (k / 2) * h);
        for y in 0..h {
            let dst = grid.index(ox, oy + y);
            grid.data[dst..dst + row].copy_from_slice(&v.data[y * row..(y + 1) * row]);
        }
    }
    Ok(grid)
}

/// Inverse of [`assemble_grid`].
pub fn split_grid(grid: &Image) -> Result<[Image; 4], GuidanceError> {
    if !grid.width.is_multiple_of(2) || !grid.height.is_multiple_of(2) || grid.width == 0 || grid.height == 0 {
        return Err(GuidanceError::Shape(format!(
            "grid {}x{} does not split into 2x2 tiles",
            grid.width, grid.height
        )));
    }
    let (w, h, c) = (grid.width / 2, grid.height / 2, grid.channels);
    let row = w * c;
    Ok(std::array::from_fn(|k| {
        let (ox, oy) = ((k % 2) * w, (k / 2) * h);
        let mut tile = Image::new(w, h, c);
        for y in 0..h {
            let src = grid.index(ox, oy + y);
            tile.data[y * row..(y + 1) * row].copy_from_slice(&grid.data[src..src + row]);
        }
        tile
    }))
}
