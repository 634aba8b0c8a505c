//! CSV readers and writers for cohorts, monthly tables and predictions.
//!
//! Writers are canonical: meters sorted by id, every slot materialized,
//! consumption with three decimals and temperatures with two, so that
//! parse → write is byte-identical for canonical input.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::calendar::{self, MONTHS, SLOTS_PER_YEAR};
use super::{Cohort, DailySeries, DailyWeather, MeterId, MeterSeries, MonthlySeries, SurveyRecord, WeatherSeries};
use crate::error::{Error, Result};

pub const READINGS_FILE: &str = "readings.csv";
pub const WEATHER_FILE: &str = "weather.csv";
pub const SURVEY_FILE: &str = "survey.csv";
pub const TRUTH_FILE: &str = "ground_truth.csv";

pub const READINGS_HEADER: &str = "meter_id,timestamp,consumption_kwh";
pub const WEATHER_HEADER: &str = "date,temp_avg_c,temp_min_c,temp_max_c";
pub const SURVEY_HEADER: &str = "meter_id,dwelling_type,num_occupants,num_bedrooms,heating_fuel,hot_water_fuel,boiler_age,loft_insulation,wall_insulation,heating_temperature,efficient_lighting,dishwasher,freezer,fridge_freezer,refrigerator,tumble_dryer,washing_machine,game_console,laptop,pc,router,set_top_box,tablet,tv";
pub const PREDICTIONS_HEADER: &str = "meter_id,month,predicted_kwh";
pub const TRUTH_HEADER: &str = "meter_id,month,consumption_kwh";

/// Twelve monthly values per meter, keyed by id.
pub type MonthlyTable = BTreeMap<MeterId, [f64; MONTHS]>;

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingInput(path.to_path_buf())
        } else {
            Error::Io(e)
        }
    })
}

fn check_header(found: &str, expected: &str) -> Result<()> {
    if found.trim_end_matches(['\r', '\n']) != expected {
        return Err(Error::BadHeader {
            expected: expected.to_owned(),
            found: found.trim_end().to_owned(),
        });
    }
    Ok(())
}

/// Parses `YYYY-MM-DDTHH:MM` on the 2017 half-hour grid.
fn parse_slot(text: &str, line: u64) -> Result<usize> {
    let malformed = || Error::MalformedTimestamp {
        line,
        value: text.to_owned(),
    };
    let ts = chrono::NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M").map_err(|_| malformed())?;
    calendar::slot_of_timestamp(ts).ok_or_else(malformed)
}

/// Reads the half-hourly readings CSV. Absent rows and empty or unparseable
/// consumption cells are missing slots.
pub fn read_readings<R: Read>(reader: R) -> Result<Vec<MeterSeries>> {
    let mut lines = BufReader::new(reader);
    let mut header = String::new();
    lines.read_line(&mut header)?;
    check_header(&header, READINGS_HEADER)?;

    let mut meters: HashMap<String, Vec<f32>> = HashMap::new();
    let mut buf = String::new();
    let mut line_no = 1u64;
    loop {
        buf.clear();
        if lines.read_line(&mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let row = buf.trim_end_matches(['\r', '\n']);
        if row.is_empty() {
            continue;
        }
        let mut parts = row.splitn(3, ',');
        let (Some(id), Some(ts), value) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::MalformedTimestamp {
                line: line_no,
                value: row.to_owned(),
            });
        };
        let slot = parse_slot(ts, line_no)?;
        let value = value.unwrap_or("").trim();
        let parsed = if value.is_empty() {
            f32::NAN
        } else {
            match value.parse::<f64>() {
                Ok(v) if v < 0.0 => {
                    return Err(Error::NegativeConsumption {
                        line: line_no,
                        value: v,
                    })
                }
                Ok(v) if v.is_finite() => v as f32,
                _ => f32::NAN,
            }
        };
        let slots = meters
            .entry(id.to_owned())
            .or_insert_with(|| vec![f32::NAN; SLOTS_PER_YEAR]);
        // A second row for the same slot is an error even if the first was empty;
        // track it with a signalling payload distinct from the default NaN.
        if slots[slot].to_bits() != f32::NAN.to_bits() {
            return Err(Error::DuplicateRow {
                meter_id: id.to_owned(),
                timestamp: ts.to_owned(),
            });
        }
        slots[slot] = if parsed.is_nan() { EXPLICIT_MISSING } else { parsed };
    }
    let mut out: Vec<MeterSeries> = meters
        .into_iter()
        .map(|(id, vals)| MeterSeries::from_raw(MeterId(id), vals))
        .collect();
    out.sort_by(|a, b| a.meter_id().cmp(b.meter_id()));
    Ok(out)
}

/// NaN with a non-default payload: "row seen, value missing".
const EXPLICIT_MISSING: f32 = f32::from_bits(0x7fc0_0001);

pub fn write_readings<W: Write>(writer: W, meters: &[MeterSeries]) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{READINGS_HEADER}")?;
    let stamps: Vec<String> = (0..SLOTS_PER_YEAR).map(calendar::format_slot).collect();
    let mut sorted: Vec<&MeterSeries> = meters.iter().collect();
    sorted.sort_by(|a, b| a.meter_id().cmp(b.meter_id()));
    for m in sorted {
        let id = m.meter_id().as_str();
        for (slot, stamp) in stamps.iter().enumerate() {
            match m.value(slot) {
                Some(v) => writeln!(w, "{id},{stamp},{v:.3}")?,
                None => writeln!(w, "{id},{stamp},")?,
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_weather<R: Read>(reader: R) -> Result<WeatherSeries> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    check_header(&rdr.headers()?.iter().collect::<Vec<_>>().join(","), WEATHER_HEADER)?;
    let mut days = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|_| {
            Error::MalformedTimestamp {
                line,
                value: rec[0].to_owned(),
            }
        })?;
        let num = |col: usize, name: &str| -> Result<f64> {
            rec[col].trim().parse::<f64>().map_err(|_| Error::MalformedValue {
                line,
                column: name.to_owned(),
                value: rec[col].to_owned(),
            })
        };
        days.push(DailyWeather {
            date,
            avg: num(1, "temp_avg_c")?,
            min: num(2, "temp_min_c")?,
            max: num(3, "temp_max_c")?,
        });
    }
    WeatherSeries::new(days)
}

pub fn write_weather<W: Write>(writer: W, weather: &WeatherSeries) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{WEATHER_HEADER}")?;
    for d in &weather.days {
        writeln!(w, "{},{:.2},{:.2},{:.2}", d.date.format("%Y-%m-%d"), d.avg, d.min, d.max)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_survey<R: Read>(reader: R) -> Result<Vec<SurveyRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    check_header(&rdr.headers()?.iter().collect::<Vec<_>>().join(","), SURVEY_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.deserialize::<SurveyRecord>() {
        out.push(rec?);
    }
    Ok(out)
}

fn fmt_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

fn fmt_opt_f(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.1}")).unwrap_or_default()
}

pub fn write_survey<W: Write>(writer: W, survey: &[SurveyRecord]) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{SURVEY_HEADER}")?;
    let mut sorted: Vec<&SurveyRecord> = survey.iter().collect();
    sorted.sort_by(|a, b| a.meter_id.cmp(&b.meter_id));
    for r in sorted {
        let fields = [
            r.meter_id.0.clone(),
            fmt_opt(&r.dwelling_type),
            fmt_opt(&r.num_occupants),
            fmt_opt(&r.num_bedrooms),
            fmt_opt(&r.heating_fuel),
            fmt_opt(&r.hot_water_fuel),
            fmt_opt(&r.boiler_age),
            fmt_opt(&r.loft_insulation),
            fmt_opt(&r.wall_insulation),
            fmt_opt_f(r.heating_temperature),
            fmt_opt_f(r.efficient_lighting),
            fmt_opt(&r.dishwasher),
            fmt_opt(&r.freezer),
            fmt_opt(&r.fridge_freezer),
            fmt_opt(&r.refrigerator),
            fmt_opt(&r.tumble_dryer),
            fmt_opt(&r.washing_machine),
            fmt_opt(&r.game_console),
            fmt_opt(&r.laptop),
            fmt_opt(&r.pc),
            fmt_opt(&r.router),
            fmt_opt(&r.set_top_box),
            fmt_opt(&r.tablet),
            fmt_opt(&r.tv),
        ];
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `meter_id,month,<value>` table; every meter must have all twelve
/// months of a single year.
pub fn read_monthly_table<R: Read>(reader: R) -> Result<(i32, MonthlyTable)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() != 3 || &header[0] != "meter_id" || &header[1] != "month" {
        return Err(Error::BadHeader {
            expected: PREDICTIONS_HEADER.to_owned(),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut partial: BTreeMap<MeterId, [Option<f64>; MONTHS]> = BTreeMap::new();
    let mut year = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        let (y, m) = calendar::parse_month(&rec[1]).ok_or_else(|| Error::MalformedTimestamp {
            line,
            value: rec[1].to_owned(),
        })?;
        if *year.get_or_insert(y) != y {
            return Err(Error::MalformedTimestamp {
                line,
                value: rec[1].to_owned(),
            });
        }
        let v: f64 = rec[2].trim().parse().map_err(|_| Error::MalformedValue {
            line,
            column: header[2].to_owned(),
            value: rec[2].to_owned(),
        })?;
        let slot = &mut partial.entry(MeterId(rec[0].to_owned())).or_insert([None; MONTHS])[m - 1];
        if slot.is_some() {
            return Err(Error::DuplicateRow {
                meter_id: rec[0].to_owned(),
                timestamp: rec[1].to_owned(),
            });
        }
        *slot = Some(v);
    }
    let mut out = MonthlyTable::new();
    for (id, months) in partial {
        let mut vals = [0.0; MONTHS];
        for (o, m) in vals.iter_mut().zip(months) {
            *o = m.ok_or_else(|| {
                Error::InsufficientData(format!("meter {id} lacks some of the twelve months"))
            })?;
        }
        out.insert(id, vals);
    }
    Ok((year.unwrap_or(calendar::FORECAST_YEAR), out))
}

pub fn write_monthly_table<W: Write>(writer: W, header: &str, year: i32, table: &MonthlyTable) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{header}")?;
    for (id, months) in table {
        for (i, v) in months.iter().enumerate() {
            writeln!(w, "{id},{},{v:.3}", calendar::format_month(year, i + 1))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes prepared daily series (`meter_id,date,consumption_kwh`).
pub fn write_daily<W: Write>(writer: W, daily: &[DailySeries]) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "meter_id,date,consumption_kwh")?;
    for s in daily {
        for (d, v) in s.days.iter().enumerate() {
            let date = calendar::date_of_day(s.year, d).format("%Y-%m-%d");
            match v {
                Some(x) => writeln!(w, "{},{date},{x:.3}", s.meter_id)?,
                None => writeln!(w, "{},{date},", s.meter_id)?,
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes prepared monthly series (`meter_id,month,consumption_kwh`, empty = unknown).
pub fn write_monthly<W: Write>(writer: W, monthly: &[MonthlySeries]) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{TRUTH_HEADER}")?;
    for s in monthly {
        for (i, v) in s.months.iter().enumerate() {
            let month = calendar::format_month(calendar::BASE_YEAR, i + 1);
            match v {
                Some(x) => writeln!(w, "{},{month},{x:.3}", s.meter_id)?,
                None => writeln!(w, "{},{month},", s.meter_id)?,
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a cohort directory (readings, weather, survey and, if present, ground truth).
pub fn read_cohort_dir(dir: &Path) -> Result<Cohort> {
    let meters = read_readings(open(&dir.join(READINGS_FILE))?)?;
    let weather = read_weather(open(&dir.join(WEATHER_FILE))?)?;
    let survey = read_survey(open(&dir.join(SURVEY_FILE))?)?;
    let truth_path = dir.join(TRUTH_FILE);
    let truth = if truth_path.exists() {
        Some(read_truth_file(&truth_path)?)
    } else {
        None
    };
    Cohort::new(meters, weather, survey, truth)
}

pub fn read_truth_file(path: &Path) -> Result<Vec<MonthlySeries>> {
    let (_, table) = read_monthly_table(open(path)?)?;
    Ok(table
        .into_iter()
        .map(|(meter_id, vals)| MonthlySeries {
            meter_id,
            months: vals.map(Some),
        })
        .collect())
}

pub fn read_monthly_table_file(path: &Path) -> Result<(i32, MonthlyTable)> {
    read_monthly_table(open(path)?)
}

/// Parses the three cohort CSVs from in-memory readers.
pub fn parse_cohort<A: Read, B: Read, C: Read>(readings: A, weather: B, survey: C) -> Result<Cohort> {
    Cohort::new(
        read_readings(readings)?,
        read_weather(weather)?,
        read_survey(survey)?,
        None,
    )
}

pub fn write_cohort_dir(dir: &Path, cohort: &Cohort) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_readings(File::create(dir.join(READINGS_FILE))?, &cohort.meters)?;
    write_weather(File::create(dir.join(WEATHER_FILE))?, &cohort.weather)?;
    write_survey(File::create(dir.join(SURVEY_FILE))?, &cohort.survey)?;
    if let Some(truth) = cohort.truth_table() {
        write_monthly_table(
            File::create(dir.join(TRUTH_FILE))?,
            TRUTH_HEADER,
            calendar::FORECAST_YEAR,
            &truth,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_readings() -> String {
        let mut s = String::from(READINGS_HEADER);
        s.push('\n');
        for id in ["a", "b"] {
            for slot in 0..SLOTS_PER_YEAR {
                let stamp = calendar::format_slot(slot);
                if id == "b" && slot == 10 {
                    s.push_str(&format!("{id},{stamp},\n"));
                } else {
                    s.push_str(&format!("{id},{stamp},{:.3}\n", (slot % 7) as f64 * 0.125));
                }
            }
        }
        s
    }

    #[test]
    fn readings_round_trip_is_byte_identical() {
        let text = small_readings();
        let meters = read_readings(text.as_bytes()).unwrap();
        assert_eq!(meters.len(), 2);
        assert_eq!(meters[1].value(10), None);
        assert_eq!(meters[1].value(11), Some(4.0 * 0.125));
        let mut out = Vec::new();
        write_readings(&mut out, &meters).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn absent_rows_are_missing() {
        let text = format!("{READINGS_HEADER}\nx,2017-03-01T10:30,1.5\n");
        let meters = read_readings(text.as_bytes()).unwrap();
        assert_eq!(meters[0].missing_count(), SLOTS_PER_YEAR - 1);
        assert_eq!(meters[0].signup_month(), Some(3));
    }

    #[test]
    fn negative_value_is_rejected() {
        let text = format!("{READINGS_HEADER}\nx,2017-01-01T00:00,-3.2\n");
        assert!(matches!(
            read_readings(text.as_bytes()),
            Err(Error::NegativeConsumption { line: 2, .. })
        ));
    }

    #[test]
    fn malformed_timestamp_and_duplicates() {
        let bad = format!("{READINGS_HEADER}\nx,2017-01-01 00:00,1\n");
        assert!(matches!(
            read_readings(bad.as_bytes()),
            Err(Error::MalformedTimestamp { .. })
        ));
        let off_grid = format!("{READINGS_HEADER}\nx,2017-01-01T00:15,1\n");
        assert!(read_readings(off_grid.as_bytes()).is_err());
        let dup = format!("{READINGS_HEADER}\nx,2017-01-01T00:00,\nx,2017-01-01T00:00,1\n");
        assert!(matches!(
            read_readings(dup.as_bytes()),
            Err(Error::DuplicateRow { .. })
        ));
    }

    #[test]
    fn unparseable_value_is_missing() {
        let text = format!("{READINGS_HEADER}\nx,2017-01-01T00:00,n/a\nx,2017-01-01T00:30,2\n");
        let m = read_readings(text.as_bytes()).unwrap();
        assert_eq!(m[0].value(0), None);
        assert_eq!(m[0].value(1), Some(2.0));
    }

    #[test]
    fn survey_round_trip_and_optional_fields() {
        let text = format!(
            "{SURVEY_HEADER}\nm1,detached,,3,gas,,,,,19.5,40.0,1,,,,1,,,,2,,,,1\nm2,,,,,,,,,,,,,,,,,,,,,,,\n"
        );
        let recs = read_survey(text.as_bytes()).unwrap();
        assert_eq!(recs[0].num_bedrooms, Some(3));
        assert_eq!(recs[0].num_occupants, None);
        assert_eq!(recs[1], SurveyRecord { meter_id: "m2".into(), ..Default::default() });
        let mut out = Vec::new();
        write_survey(&mut out, &recs).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn monthly_table_round_trip() {
        let mut t = MonthlyTable::new();
        t.insert("a".into(), [1.5; 12]);
        t.insert("b".into(), std::array::from_fn(|i| i as f64));
        let mut out = Vec::new();
        write_monthly_table(&mut out, PREDICTIONS_HEADER, 2018, &t).unwrap();
        let (year, back) = read_monthly_table(out.as_slice()).unwrap();
        assert_eq!(year, 2018);
        assert_eq!(back, t);
    }

    #[test]
    fn monthly_table_requires_all_months() {
        let text = "meter_id,month,predicted_kwh\na,2018-01,1.0\n";
        assert!(read_monthly_table(text.as_bytes()).is_err());
    }
}
