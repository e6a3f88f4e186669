export {
  DatasetHandle,
  openDataset,
  validatePlan,
  type Batch,
  type OpenOptions,
} from "./bridge.js";
export {
  median,
  readRecording,
  readWindowFile,
  sha256Hex,
  type Recording,
  type SubjectMeta,
  type WindowFile,
  type WindowLabel,
  type WindowManifest,
} from "./format.js";
