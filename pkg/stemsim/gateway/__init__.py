from .runner import CommandContext, CommandFn, CommandGateway, CommandResult
