//! Published per-year Fermi-Dirac parameters used to generate synthetic
//! tables, plus small helpers shared by the integration tests.
#![allow(dead_code)]
// 0.4343 is a published temperature, not log10(e)
#![allow(clippy::approx_constant)]

use fermi_income::analysis::synth_table;
use fermi_income::ingest::{IncomeBasis, MeanOffset, Period, TableKind, TableMeta, UnitHolder};
use fermi_income::{DecileTable, ModelFamily, ModelParams};

#[derive(Debug, Clone, Copy)]
pub struct Row {
    pub country: &'static str,
    pub kind: TableKind,
    pub basis: IncomeBasis,
    pub holder: UnitHolder,
    pub year: i32,
    pub t: f64,
    pub c: f64,
    pub mu: f64,
}

impl Row {
    pub fn params(&self) -> ModelParams {
        ModelParams::new(self.t, self.mu, self.c)
    }

    pub fn meta(&self) -> TableMeta {
        TableMeta {
            country: self.country.into(),
            period: Period::year(self.year),
            kind: self.kind,
            basis: self.basis,
            holder: self.holder,
            currency: "EUR".into(),
            scale_factor: 1.0,
        }
    }

    pub fn table(&self) -> DecileTable {
        synth_table(&self.params(), ModelFamily::FermiDirac, self.meta(), MeanOffset::default(), 0.0, 0)
            .unwrap_or_else(|e| panic!("{self:?}: {e}"))
    }
}

use IncomeBasis::{Gross, InactivePersons, Net};
use TableKind::{MeanIncome, MedianMonthly, UpperLimit};
use UnitHolder::{Household, Individual};

/// (year, T, c, mu)
type Triple = (i32, f64, f64, f64);

const FINLAND_UPPER: &[Triple] = &[
    (1987, 0.2344, 4.588, 10.08), (1988, 0.2461, 4.609, 10.11), (1989, 0.2472, 4.602, 10.17),
    (1990, 0.2573, 4.633, 10.21), (1991, 0.2516, 4.632, 10.22), (1992, 0.2501, 4.645, 10.16),
    (1993, 0.276, 4.692, 10.14), (1994, 0.2906, 4.725, 10.15), (1995, 0.2886, 4.702, 10.18),
    (1996, 0.2881, 4.671, 10.21), (1997, 0.3029, 4.674, 10.27), (1998, 0.2967, 4.636, 10.31),
    (1999, 0.2992, 4.64, 10.34), (2000, 0.3133, 4.65, 10.37), (2001, 0.3018, 4.63, 10.39),
    (2002, 0.3028, 4.633, 10.42), (2003, 0.3106, 4.643, 10.45), (2004, 0.3083, 4.625, 10.5),
    (2005, 0.3117, 4.631, 10.53), (2006, 0.3191, 4.633, 10.55), (2007, 0.3283, 4.642, 10.58),
    (2008, 0.3074, 4.621, 10.56), (2009, 0.3036, 4.618, 10.59),
];

pub const FINLAND_MEAN: &[Triple] = &[
    (1987, 0.361, 4.827, 10.22), (1988, 0.3893, 4.874, 10.26), (1989, 0.4048, 4.899, 10.32),
    (1990, 0.4007, 4.9, 10.36), (1991, 0.3993, 4.902, 10.37), (1992, 0.413, 4.955, 10.31),
    (1993, 0.477, 5.065, 10.31), (1994, 0.4762, 5.064, 10.31), (1995, 0.4989, 5.09, 10.34),
    (1996, 0.5332, 5.205, 10.35), (1997, 0.5624, 5.14, 10.45), (1998, 0.5893, 5.147, 10.5),
    (1999, 0.6739, 5.314, 10.54), (2000, 0.7052, 5.349, 10.56), (2001, 0.6181, 5.159, 10.6),
    (2002, 0.6066, 5.135, 10.63), (2003, 0.6282, 5.175, 10.65), (2004, 0.6489, 5.187, 10.71),
    (2005, 0.6543, 5.196, 10.75), (2006, 0.6734, 5.212, 10.77), (2007, 0.7062, 5.247, 10.8),
    (2008, 0.6354, 5.135, 10.79), (2009, 0.5873, 5.066, 10.81),
];

const FRANCE_UPPER: &[Triple] = &[
    (2002, 0.3946, 4.734, 10.4), (2003, 0.3835, 4.721, 10.39), (2004, 0.3745, 4.711, 10.38),
    (2005, 0.3778, 4.712, 10.39), (2006, 0.3906, 4.73, 10.42), (2007, 0.3824, 4.713, 10.44),
    (2008, 0.3901, 4.746, 10.45), (2009, 0.387, 4.716, 10.46),
];

const FRANCE_MEAN: &[Triple] = &[
    (2003, 0.6644, 5.134, 10.59), (2004, 0.6793, 5.17, 10.58), (2005, 0.673, 5.121, 10.62),
    (2006, 0.7019, 5.165, 10.64), (2007, 0.6904, 5.144, 10.66), (2008, 0.7074, 5.185, 10.67),
    (2009, 0.6796, 5.112, 10.69),
];

const ITALY_UPPER: &[Triple] = &[
    (2000, 0.4358, 4.566, 10.77), (2002, 0.4421, 4.573, 10.84), (2004, 0.4607, 4.623, 10.88),
    (2006, 0.4254, 4.59, 10.93), (2008, 0.4616, 4.616, 10.98),
];

// The 2000 mean-income row is published without mu and is left out.
const ITALY_MEAN: &[Triple] = &[
    (2002, 0.6966, 4.839, 11.1), (2004, 0.7323, 4.924, 11.13), (2006, 0.7266, 4.938, 11.19),
    (2008, 0.7111, 4.886, 11.23),
];

const ROMANIA_MEAN: &[Triple] = &[
    (2005, 0.7977, 5.722, 7.581), (2006, 0.7926, 5.547, 7.787), (2007, 0.7419, 5.461, 7.991),
    (2008, 0.6739, 5.355, 8.228), (2009, 0.6382, 5.385, 8.274), (2010, 0.6245, 5.468, 8.227),
];

pub const MEXICO_MEAN: &[Triple] = &[
    (2000, 1.311, 5.102, 9.33), (2002, 1.241, 5.088, 9.267), (2004, 1.219, 5.076, 9.146),
    (2005, 1.246, 5.094, 9.227), (2006, 1.25, 5.141, 9.258), (2008, 1.228, 5.086, 9.257),
];

const FRANCE_GROSS_MEAN: &[Triple] = &[
    (2003, 0.3959, 4.577, 10.47), (2004, 0.3924, 4.582, 10.45), (2005, 0.3966, 4.585, 10.47),
    (2006, 0.4026, 4.592, 10.49), (2007, 0.3931, 4.578, 10.5), (2008, 0.4022, 4.599, 10.52),
    (2009, 0.3948, 4.578, 10.53),
];

const FRANCE_INACTIVE_MEAN: &[Triple] = &[
    (2002, 0.4372, 4.871, 10.37), (2003, 0.4315, 4.88, 10.35), (2004, 0.4064, 4.839, 10.34),
    (2005, 0.4151, 4.842, 10.36), (2006, 0.4343, 4.854, 10.41), (2007, 0.4247, 4.846, 10.41),
    (2008, 0.4355, 4.88, 10.42), (2009, 0.4146, 4.824, 10.43),
];

const HONG_KONG_MEDIAN: &[Triple] = &[
    (1991, 0.6161, 4.654, 10.22), (1996, 0.615, 4.638, 10.79), (2001, 0.6188, 4.587, 10.92),
];

type Group = (&'static str, TableKind, IncomeBasis, UnitHolder, &'static [Triple]);

const GROUPS: &[Group] = &[
    ("Finland", UpperLimit, Net, Individual, FINLAND_UPPER),
    ("Finland", MeanIncome, Net, Individual, FINLAND_MEAN),
    ("France", UpperLimit, Net, Household, FRANCE_UPPER),
    ("France", MeanIncome, Net, Household, FRANCE_MEAN),
    ("Italy", UpperLimit, Net, Household, ITALY_UPPER),
    ("Italy", MeanIncome, Net, Household, ITALY_MEAN),
    ("Romania", MeanIncome, Net, Household, ROMANIA_MEAN),
    ("Mexico", MeanIncome, Net, Individual, MEXICO_MEAN),
    ("France", MeanIncome, Gross, Household, FRANCE_GROSS_MEAN),
    ("France", MeanIncome, InactivePersons, Household, FRANCE_INACTIVE_MEAN),
    ("Hong Kong", MedianMonthly, Net, Household, HONG_KONG_MEDIAN),
];

fn expand(group: &Group) -> impl Iterator<Item = Row> + '_ {
    let &(country, kind, basis, holder, triples) = group;
    triples.iter().map(move |&(year, t, c, mu)| Row { country, kind, basis, holder, year, t, c, mu })
}

/// Every complete published parameter row.
pub fn published_rows() -> Vec<Row> {
    GROUPS.iter().flat_map(expand).collect()
}

pub fn rows_of(country: &str, kind: TableKind, basis: IncomeBasis) -> Vec<Row> {
    GROUPS
        .iter()
        .filter(|g| g.0 == country && g.1 == kind && g.2 == basis)
        .flat_map(expand)
        .collect()
}

/// Parameter ranges spanned by the annual fits.
pub const T_RANGE: (f64, f64) = (0.23, 1.32);
pub const MU_RANGE: (f64, f64) = (7.5, 11.3);
pub const C_RANGE: (f64, f64) = (4.5, 5.8);
