use std::path::Path;
use std::sync::Arc;

use pathoed_core::{
    build_desk_instance, build_grid_mesh, load_mesh, BayesUtility, CellRect, Criterion, DeskSpec, LinearGaussianModel,
    NavMesh, PathDistribution, PolicyKind, PolicyParams, Utility, UtilityTable,
};

use crate::failure::{read_input, Failure};
use crate::{MeshArgs, PolicyArgs};

/// Mesh plus, for a desk instance, its Bayesian model and default path length.
pub struct Problem {
    pub mesh: Arc<NavMesh>,
    pub model: Option<LinearGaussianModel>,
    pub default_length: Option<usize>,
}

/// `length` overrides the instance's path length before the model is built,
/// so the noise table covers every observation time.
pub fn load_problem(args: &MeshArgs, length: Option<usize>) -> Result<Problem, Failure> {
    if let Some(file) = &args.instance {
        let mut spec = DeskSpec::from_json(&read_input(file)?).map_err(Failure::setup)?;
        if let Some(n) = length {
            spec.path_length = n;
        }
        let (mesh, model) = build_desk_instance(&spec).map_err(Failure::setup)?;
        return Ok(Problem { mesh: Arc::new(mesh), model: Some(model), default_length: Some(spec.path_length) });
    }
    let mesh = if let Some(file) = &args.mesh {
        load_mesh(&read_input(file)?).map_err(Failure::setup)?
    } else if let Some(grid) = &args.grid {
        let (rows, cols) = parse_grid(grid)?;
        let holes = args.holes.iter().map(|h| parse_hole(h)).collect::<Result<Vec<_>, _>>()?;
        build_grid_mesh(rows, cols, &holes).map_err(Failure::setup)?
    } else {
        return Err(Failure::Usage("one of --mesh, --grid, or --instance is required".into()));
    };
    Ok(Problem { mesh: Arc::new(mesh), model: None, default_length: None })
}

fn parse_grid(text: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::Usage(format!("invalid grid {text:?}, expected ROWSxCOLS"));
    let (r, c) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((r.trim().parse().map_err(|_| bad())?, c.trim().parse().map_err(|_| bad())?))
}

fn parse_hole(text: &str) -> Result<CellRect, Failure> {
    let parts: Vec<usize> = text
        .split(',')
        .map(|t| t.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Usage(format!("invalid hole {text:?}, expected row,col,height,width")))?;
    match parts[..] {
        [row, col, height, width] => Ok(CellRect { row, col, height, width }),
        _ => Err(Failure::Usage(format!("invalid hole {text:?}, expected row,col,height,width"))),
    }
}

pub fn path_length(problem: &Problem, requested: Option<usize>) -> Result<usize, Failure> {
    requested
        .or(problem.default_length)
        .ok_or_else(|| Failure::Usage("--length is required without an --instance".into()))
}

pub fn load_policy(problem: &Problem, args: &PolicyArgs) -> Result<PathDistribution, Failure> {
    let mesh = &problem.mesh;
    let mut params = match &args.policy {
        Some(file) => PolicyParams::from_json(&read_input(file)?, mesh).map_err(Failure::setup)?,
        None => PolicyParams::uniform(mesh, 0.5).map_err(Failure::setup)?,
    };
    if let Some(label) = args.start {
        if label == 0 || label > mesh.num_vertices() {
            return Err(Failure::Usage(format!("start vertex {label} is not a vertex of the mesh")));
        }
        params = params.with_fixed_start(label - 1);
    }
    let order = match (args.kind, args.order) {
        (_, Some(k)) => k,
        (PolicyKind::FirstOrder, None) => 1,
        _ => 2,
    };
    if args.kind != PolicyKind::FirstOrder {
        params = match (params.lag_weights().map(<[f64]>::to_vec), args.lag_mode) {
            (None, mode) => params.with_default_lags(order, mode.unwrap_or_default()),
            (Some(weights), Some(mode)) => params.with_lag_weights(Some(weights), mode),
            (Some(_), None) => params,
        };
    }
    let n = path_length(problem, args.length)?;
    PathDistribution::new(args.kind, mesh.clone(), params, order, n).map_err(Failure::setup)
}

/// Utility from a table file if given, otherwise the instance's Bayesian criterion.
pub fn load_utility(
    problem: &Problem,
    table: Option<&Path>,
    criterion: Criterion,
) -> Result<Box<dyn Utility>, Failure> {
    if let Some(file) = table {
        let table = UtilityTable::parse(&read_input(file)?).map_err(Failure::setup)?;
        return Ok(Box::new(table));
    }
    match &problem.model {
        Some(model) => Ok(Box::new(BayesUtility { model: model.clone(), criterion })),
        None => Err(Failure::Usage("a utility needs --utility-table or --instance".into())),
    }
}
