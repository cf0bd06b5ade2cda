import { DebuggerModel } from "./model.js";
import { Connection, defaultUrl } from "./net.js";
import { View } from "./view.js";

const model = new DebuggerModel();

const connection = new Connection(defaultUrl(), {
  onLine: (line) => {
    model.receiveLine(line);
    view.invalidate();
  },
  onStatus: (status) => {
    model.status = status;
    view.invalidate();
  },
});

const view = new View(document, model, {
  onCycle: (target) => {
    const command = model.cycle(target);
    if (command) connection.send(command);
    view.invalidate();
  },
  onSelect: (ruleId) => {
    model.select(ruleId);
    view.invalidate();
  },
  onSort: (key) => {
    model.table.setSort(key);
    view.invalidate();
  },
  onSaveConfig: (path) => {
    connection.send(model.configCommand("save-config", path));
  },
  onLoadConfig: (path) => {
    connection.send(model.configCommand("load-config", path));
  },
});

view.bindChrome();
view.invalidate();
connection.start();
