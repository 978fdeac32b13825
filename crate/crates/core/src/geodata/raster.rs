use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::transform::{read_world_file, WorldTransform};
use crate::geom::Point2;
use crate::{Error, Result};

/// Row-major 8-bit grayscale grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Input(format!("empty image {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::Input(format!(
                "pixel buffer has {} entries, expected {}",
                pixels.len(),
                width * height
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self { width, height, pixels }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    /// Copy of the rectangle `[x0, x0+w) × [y0, y0+h)`.
    pub fn sub_image(&self, x0: usize, y0: usize, w: usize, h: usize) -> GrayImage {
        let mut pixels = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let row = y * self.width;
            pixels.extend_from_slice(&self.pixels[row + x0..row + x0 + w]);
        }
        GrayImage {
            width: w,
            height: h,
            pixels,
        }
    }

    /// Rotates the image by 90° clockwise.
    pub fn rotate90(&self) -> GrayImage {
        let (w, h) = (self.height, self.width);
        GrayImage::from_fn(w, h, |x, y| self.get(y, self.height - 1 - x))
    }

    /// ASCII PGM (P2).
    pub fn to_pgm(&self) -> String {
        let mut s = format!("P2\n{} {}\n255\n", self.width, self.height);
        for row in self.pixels.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_pgm()).map_err(|e| Error::io(path, e))
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let buf = image::GrayImage::from_raw(self.width as u32, self.height as u32, self.pixels.clone())
            .expect("buffer length checked on construction");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Load {
                what: path.display().to_string(),
                reason: e.to_string(),
            })
    }

    pub fn parse_pgm(text: &str, name: &str) -> Result<GrayImage> {
        // Tokens with their line numbers, comments stripped.
        let mut tokens = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("");
            for tok in body.split_whitespace() {
                tokens.push((i + 1, tok));
            }
        }
        let mut it = tokens.into_iter();
        match it.next() {
            Some((_, "P2")) => {}
            Some((l, m)) => return Err(Error::parse(name, l, format!("unsupported PGM magic {m:?}"))),
            None => return Err(Error::parse(name, 1, "empty PGM")),
        }
        let mut header = [0usize; 3];
        for h in header.iter_mut() {
            let (l, t) = it.next().ok_or_else(|| Error::parse(name, 1, "truncated PGM header"))?;
            *h = t
                .parse()
                .map_err(|_| Error::parse(name, l, format!("bad header value {t:?}")))?;
        }
        let [w, h, maxval] = header;
        if maxval == 0 || maxval > 255 {
            return Err(Error::parse(name, 2, format!("unsupported maxval {maxval}")));
        }
        let mut pixels = Vec::with_capacity(w * h);
        for (l, t) in it.by_ref().take(w * h) {
            let v: usize = t
                .parse()
                .map_err(|_| Error::parse(name, l, format!("bad pixel value {t:?}")))?;
            if v > maxval {
                return Err(Error::parse(name, l, format!("pixel value {v} exceeds maxval")));
            }
            pixels.push(((v * 255 + maxval / 2) / maxval) as u8);
        }
        if pixels.len() != w * h {
            return Err(Error::parse(name, text.lines().count(), "truncated pixel data"));
        }
        GrayImage::new(w, h, pixels)
    }
}

#[inline]
fn luma(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).round() as u8
}

/// Loads a PNG (any color type, converted to luma) or an ASCII PGM.
pub fn read_raster(path: &Path) -> Result<GrayImage> {
    let load_err = |reason: String| Error::Load {
        what: path.display().to_string(),
        reason,
    };
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    if ext.as_deref() == Some("pgm") {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        return GrayImage::parse_pgm(&text, &path.display().to_string());
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
        .map_err(|e| load_err(e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels = match img {
        image::DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| luma(p.0[0], p.0[1], p.0[2]))
            .collect(),
    };
    GrayImage::new(w, h, pixels)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RasterTile {
    pub name: String,
    pub image: GrayImage,
    pub transform: WorldTransform<f64>,
    /// `(column, row)` in the mosaic grid.
    pub grid_index: (usize, usize),
}

impl RasterTile {
    pub fn width(&self) -> usize {
        self.image.width
    }

    pub fn height(&self) -> usize {
        self.image.height
    }
}

/// One entry of the mosaic index file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileEntry {
    pub file: String,
    pub col: usize,
    pub row: usize,
}

/// A complete grid of abutting tiles sharing one pixel size.
#[derive(Clone, Debug)]
pub struct Mosaic {
    pub cols: usize,
    pub rows: usize,
    tiles: Vec<RasterTile>,
    /// Global pixel x of each column start, plus the total width at the end.
    col_starts: Vec<usize>,
    row_starts: Vec<usize>,
    pub transform: WorldTransform<f64>,
}

impl Mosaic {
    /// Assembles a mosaic and checks grid completeness, pixel size agreement
    /// and exact abutment of neighbouring tiles.
    pub fn from_tiles(tiles: Vec<RasterTile>) -> Result<Mosaic> {
        if tiles.is_empty() {
            return Err(Error::Load {
                what: "mosaic".into(),
                reason: "no tiles".into(),
            });
        }
        let cols = tiles.iter().map(|t| t.grid_index.0).max().unwrap() + 1;
        let rows = tiles.iter().map(|t| t.grid_index.1).max().unwrap() + 1;
        let mut slots: Vec<Option<RasterTile>> = vec![None; cols * rows];
        for t in tiles {
            let (c, r) = t.grid_index;
            let slot = &mut slots[r * cols + c];
            if let Some(prev) = slot {
                return Err(Error::Load {
                    what: t.name.clone(),
                    reason: format!("grid cell ({c}, {r}) already holds {}", prev.name),
                });
            }
            *slot = Some(t);
        }
        let mut grid = Vec::with_capacity(cols * rows);
        for (i, s) in slots.into_iter().enumerate() {
            match s {
                Some(t) => grid.push(t),
                None => {
                    return Err(Error::Load {
                        what: format!("tile ({}, {})", i % cols, i / cols),
                        reason: "missing from mosaic index".into(),
                    })
                }
            }
        }
        let at = |c: usize, r: usize| &grid[r * cols + c];
        let s = at(0, 0).transform.pixel_size;
        let tol = 1e-6 * s;
        for t in &grid {
            if ((t.transform.pixel_size - s) / s).abs() > 1e-12 {
                return Err(Error::Geometry(format!(
                    "tile {} has pixel size {} but {} has {}",
                    t.name,
                    t.transform.pixel_size,
                    at(0, 0).name,
                    s
                )));
            }
        }
        for r in 0..rows {
            for c in 0..cols {
                let t = at(c, r);
                if c + 1 < cols {
                    let n = at(c + 1, r);
                    let end_x = t.transform.origin_x + t.width() as f64 * s;
                    if (n.transform.origin_x - end_x).abs() > tol
                        || (n.transform.origin_y - t.transform.origin_y).abs() > tol
                        || n.height() != t.height()
                    {
                        return Err(Error::Geometry(format!("tiles {} and {} do not abut", t.name, n.name)));
                    }
                }
                if r + 1 < rows {
                    let n = at(c, r + 1);
                    let end_y = t.transform.origin_y - t.height() as f64 * s;
                    if (n.transform.origin_y - end_y).abs() > tol
                        || (n.transform.origin_x - t.transform.origin_x).abs() > tol
                        || n.width() != t.width()
                    {
                        return Err(Error::Geometry(format!("tiles {} and {} do not abut", t.name, n.name)));
                    }
                }
            }
        }
        let mut col_starts = vec![0];
        for c in 0..cols {
            col_starts.push(col_starts[c] + at(c, 0).width());
        }
        let mut row_starts = vec![0];
        for r in 0..rows {
            row_starts.push(row_starts[r] + at(0, r).height());
        }
        let transform = at(0, 0).transform;
        Ok(Mosaic {
            cols,
            rows,
            tiles: grid,
            col_starts,
            row_starts,
            transform,
        })
    }

    pub fn width(&self) -> usize {
        self.col_starts[self.cols]
    }

    pub fn height(&self) -> usize {
        self.row_starts[self.rows]
    }

    pub fn tile(&self, col: usize, row: usize) -> &RasterTile {
        &self.tiles[row * self.cols + col]
    }

    pub fn tiles(&self) -> &[RasterTile] {
        &self.tiles
    }

    /// Global pixel origin of a tile.
    pub fn tile_offset(&self, col: usize, row: usize) -> (usize, usize) {
        (self.col_starts[col], self.row_starts[row])
    }

    /// Grid column containing global pixel column `x` (`x < width`).
    pub fn column_of(&self, x: usize) -> usize {
        self.col_starts.partition_point(|&s| s <= x) - 1
    }

    pub fn row_of(&self, y: usize) -> usize {
        self.row_starts.partition_point(|&s| s <= y) - 1
    }

    /// Pixel value by global pixel index.
    pub fn pixel(&self, x: usize, y: usize) -> u8 {
        let (c, r) = (self.column_of(x), self.row_of(y));
        self.tile(c, r).image.get(x - self.col_starts[c], y - self.row_starts[r])
    }

    /// World extent as `(min, max)` corners.
    pub fn world_extent(&self) -> (Point2<f64>, Point2<f64>) {
        let tl = self.transform.pixel_to_world(Point2::new(0.0, 0.0));
        let br = self
            .transform
            .pixel_to_world(Point2::new(self.width() as f64, self.height() as f64));
        (Point2::new(tl.x, br.y), Point2::new(br.x, tl.y))
    }
}

fn world_file_for(image_path: &Path) -> PathBuf {
    image_path.with_extension("wld")
}

/// Loads the tiles listed in a JSON index (`[{file, col, row}, ...]`), each
/// with its `.wld` sidecar, and assembles the mosaic.
pub fn load_mosaic(directory: &Path, index_file: &Path) -> Result<Mosaic> {
    let text = fs::read_to_string(index_file).map_err(|e| Error::io(index_file, e))?;
    let entries: Vec<TileEntry> = serde_json::from_str(&text)
        .map_err(|e| Error::parse(index_file.display().to_string(), e.line(), e.to_string()))?;
    let mut tiles = Vec::with_capacity(entries.len());
    for entry in entries {
        let path = directory.join(&entry.file);
        if !path.is_file() {
            return Err(Error::Load {
                what: format!("tile {}", entry.file),
                reason: format!("file {} not found", path.display()),
            });
        }
        let image = read_raster(&path)?;
        let wld = world_file_for(&path);
        if !wld.is_file() {
            return Err(Error::Load {
                what: format!("tile {}", entry.file),
                reason: format!("world file {} not found", wld.display()),
            });
        }
        let transform = read_world_file(&wld)?;
        tiles.push(RasterTile {
            name: entry.file,
            image,
            transform,
            grid_index: (entry.col, entry.row),
        });
    }
    Mosaic::from_tiles(tiles)
}
