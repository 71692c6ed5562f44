export {
  FORMAT_VERSION,
  RecordFormatError,
  parsePairs,
  parseResults,
  serializePairs,
  validatePair,
} from "./records.js";
export type { CameraJson, PairRecord, ResultRecord } from "./records.js";
export { BoundEstimator, estimatePair } from "./estimator.js";
export type { EstimationMode, EstimatePairInput, EstimatorOptions } from "./estimator.js";
export { buildPairRecord, convertExternal } from "./convert.js";
export type { ConvertMeta } from "./convert.js";
