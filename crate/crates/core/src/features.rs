//! Per-instance feature records and their CSV / JSON serializations.
//!
//! Column semantics: `*_x` is the row coordinate and `*_y` the column
//! coordinate. `bbox_topleft` is the rotated-box corner with the smallest
//! `row + col`, `bbox_bottomright` the one with the largest.

use serde::ser::{Serialize, SerializeMap, Serializer};

use crate::error::{Error, Result};
use crate::geometry::Features2D;
use crate::numfmt::{format_sig6, round_sig6};
use crate::raster::InstanceMeta;

pub const COLUMNS_2D: [&str; 13] = [
    "id",
    "label",
    "score",
    "Dorsal_length",
    "Abdominal_width",
    "Area",
    "Centroid_x",
    "Centroid_y",
    "bbox_topleft_x",
    "bbox_topleft_y",
    "bbox_bottomright_x",
    "bbox_bottomright_y",
    "bbox_rotatedangle",
];

pub const COLUMNS_3D_EXTRA: [&str; 3] = ["Height_average", "Height_centroid", "Volume"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    TwoD,
    ThreeD,
}

impl Schema {
    pub fn columns(self) -> Vec<&'static str> {
        let mut cols = COLUMNS_2D.to_vec();
        if self == Schema::ThreeD {
            cols.extend(COLUMNS_3D_EXTRA);
        }
        cols
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Features3D {
    pub height_average_m: f64,
    pub height_centroid_m: f64,
    /// Sum of in-mask heights times the pixel footprint `1 / ppm^2`.
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub meta: InstanceMeta,
    pub two_d: Features2D,
    pub three_d: Option<Features3D>,
}

impl FeatureRecord {
    pub fn new(meta: InstanceMeta, two_d: Features2D, three_d: Option<Features3D>) -> Self {
        Self {
            meta,
            two_d,
            three_d,
        }
    }

    pub fn schema(&self) -> Schema {
        if self.three_d.is_some() {
            Schema::ThreeD
        } else {
            Schema::TwoD
        }
    }

    /// Numeric columns after `id,label,score`, in schema order.
    pub fn numeric_values(&self) -> Vec<f64> {
        let f = &self.two_d;
        let mut values = vec![
            f.dorsal_length,
            f.abdominal_width,
            f.area,
            f.centroid.row,
            f.centroid.col,
            f.bbox_topleft.row,
            f.bbox_topleft.col,
            f.bbox_bottomright.row,
            f.bbox_bottomright.col,
            f.rotated_angle_deg,
        ];
        if let Some(t) = &self.three_d {
            values.extend([t.height_average_m, t.height_centroid_m, t.volume]);
        }
        values
    }
}

/// JSON object keyed by the CSV column names, reals rounded like the CSV.
impl Serialize for FeatureRecord {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let columns = self.schema().columns();
        let mut map = serializer.serialize_map(Some(columns.len()))?;
        map.serialize_entry("id", &self.meta.id)?;
        map.serialize_entry("label", &self.meta.label)?;
        map.serialize_entry("score", &round_sig6(self.meta.score))?;
        for (name, value) in columns[3..].iter().zip(self.numeric_values()) {
            map.serialize_entry(name, &round_sig6(value))?;
        }
        map.end()
    }
}

/// Feature table with an explicit schema; used for empty tables.
pub fn write_features_csv_with_schema(
    records: &[FeatureRecord],
    schema: Schema,
) -> Result<Vec<u8>> {
    if records.iter().any(|r| r.schema() != schema) {
        return Err(Error::MixedSchemas);
    }
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = |e: csv::Error| Error::InvalidParameter(e.to_string());
    writer.write_record(schema.columns()).map_err(io)?;
    for record in records {
        let mut row = vec![
            record.meta.id.to_string(),
            record.meta.label.clone(),
            format_sig6(record.meta.score),
        ];
        row.extend(record.numeric_values().into_iter().map(format_sig6));
        writer.write_record(&row).map_err(io)?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::InvalidParameter(e.to_string()))
}

/// Feature table; the schema follows the first record (2D when empty).
pub fn write_features_csv(records: &[FeatureRecord]) -> Result<Vec<u8>> {
    let schema = records.first().map_or(Schema::TwoD, FeatureRecord::schema);
    write_features_csv_with_schema(records, schema)
}
