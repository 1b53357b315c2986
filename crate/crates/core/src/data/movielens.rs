//! Converter from the MovieLens-1M `.dat` files to the CSV layout used here.
//!
//! Output columns: `label,user_id,gender,age,occupation,zip,movie_id,genre`.
//! The label is `rating >= 4`. Neutral ratings (3) are dropped unless
//! `keep_neutral` is set. Only the first listed genre of a movie is kept
//! because fields are single-valued.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MOVIELENS_FIELDS: [&str; 7] = ["user_id", "gender", "age", "occupation", "zip", "movie_id", "genre"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvertStats {
    pub ratings_read: usize,
    pub rows_written: usize,
    pub positives: usize,
}

fn read_lossy(path: &Path) -> Result<String> {
    // movies.dat is Latin-1; only ASCII columns are used.
    Ok(String::from_utf8_lossy(&fs::read(path)?).into_owned())
}

fn split_dat(line: &str) -> Vec<&str> {
    line.split("::").collect()
}

fn bad(file: &str, line: usize, msg: &str) -> Error {
    Error::Parse {
        line,
        msg: format!("{file}: {msg}"),
    }
}

fn sanitize(v: &str) -> String {
    v.trim().replace(',', ";")
}

/// Convert `ratings.dat`, `users.dat` and `movies.dat` from `dir` into CSV text.
pub fn convert_movielens_text(dir: &Path, keep_neutral: bool) -> Result<(String, ConvertStats)> {
    let users_text = read_lossy(&dir.join("users.dat"))?;
    let mut users: HashMap<String, [String; 4]> = HashMap::new();
    for (k, line) in users_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols = split_dat(line);
        if cols.len() != 5 {
            return Err(bad("users.dat", k + 1, "expected 5 columns"));
        }
        users.insert(
            cols[0].trim().to_owned(),
            [
                sanitize(cols[1]),
                sanitize(cols[2]),
                sanitize(cols[3]),
                sanitize(cols[4]),
            ],
        );
    }

    let movies_text = read_lossy(&dir.join("movies.dat"))?;
    let mut genres: HashMap<String, String> = HashMap::new();
    for (k, line) in movies_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols = split_dat(line);
        if cols.len() != 3 {
            return Err(bad("movies.dat", k + 1, "expected 3 columns"));
        }
        let first = cols[2].split('|').next().unwrap_or("").to_owned();
        genres.insert(cols[0].trim().to_owned(), sanitize(&first));
    }

    let ratings_text = read_lossy(&dir.join("ratings.dat"))?;
    let mut out = String::from("label");
    for f in MOVIELENS_FIELDS {
        out.push(',');
        out.push_str(f);
    }
    out.push('\n');
    let mut stats = ConvertStats {
        ratings_read: 0,
        rows_written: 0,
        positives: 0,
    };
    for (k, line) in ratings_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols = split_dat(line);
        if cols.len() != 4 {
            return Err(bad("ratings.dat", k + 1, "expected 4 columns"));
        }
        stats.ratings_read += 1;
        let rating: u32 = cols[2]
            .trim()
            .parse()
            .map_err(|_| bad("ratings.dat", k + 1, "rating is not an integer"))?;
        if rating == 3 && !keep_neutral {
            continue;
        }
        let user = users
            .get(cols[0].trim())
            .ok_or_else(|| bad("ratings.dat", k + 1, "unknown user"))?;
        let genre = genres
            .get(cols[1].trim())
            .ok_or_else(|| bad("ratings.dat", k + 1, "unknown movie"))?;
        let label = u8::from(rating >= 4);
        stats.positives += label as usize;
        stats.rows_written += 1;
        out.push_str(&format!(
            "{label},{},{},{},{},{},{},{}\n",
            sanitize(cols[0]),
            user[0],
            user[1],
            user[2],
            user[3],
            sanitize(cols[1]),
            genre
        ));
    }
    Ok((out, stats))
}

pub fn convert_movielens(dir: &Path, out_csv: &Path, keep_neutral: bool) -> Result<ConvertStats> {
    let (text, stats) = convert_movielens_text(dir, keep_neutral)?;
    fs::write(out_csv, text)?;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::build_vocab;

    fn fixture(dir: &Path) {
        fs::write(dir.join("users.dat"), "1::F::1::10::48067\n2::M::56::16::70072\n").unwrap();
        fs::write(
            dir.join("movies.dat"),
            "1::Toy Story (1995)::Animation|Children's|Comedy\n2::Jumanji (1995)::Adventure|Children's|Fantasy\n",
        )
        .unwrap();
        fs::write(
            dir.join("ratings.dat"),
            "1::1::5::978300760\n1::2::3::978302109\n2::1::2::978301968\n2::2::4::978300275\n",
        )
        .unwrap();
    }

    #[test]
    fn converts_and_drops_neutral() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        let (text, stats) = convert_movielens_text(dir.path(), false).unwrap();
        assert_eq!(stats.ratings_read, 4);
        assert_eq!(stats.rows_written, 3);
        assert_eq!(stats.positives, 2);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "label,user_id,gender,age,occupation,zip,movie_id,genre");
        assert_eq!(lines[1], "1,1,F,1,10,48067,1,Animation");
        assert_eq!(lines[2], "0,2,M,56,16,70072,1,Animation");
    }

    #[test]
    fn keep_neutral_retains_all_ratings() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        let (_, stats) = convert_movielens_text(dir.path(), true).unwrap();
        assert_eq!(stats.rows_written, 4);
        assert_eq!(stats.positives, 2);
    }

    #[test]
    fn output_is_loadable_with_seven_fields() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        let csv = dir.path().join("ml.csv");
        convert_movielens(dir.path(), &csv, false).unwrap();
        let schema = build_vocab(&csv, 0).unwrap();
        assert_eq!(schema.num_fields(), 7);
    }
}
